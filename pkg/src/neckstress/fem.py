"""Quadratic vector finite elements for the interior Dirichlet problems.

Displacements are discretized with P2 (six-node) triangles on straight-edged
cells, two components per scalar dof.  Gradients of P2 fields are linear per
cell, which is what the pointwise gradient measurements need.  All boundary
conditions are Dirichlet and imposed strongly by row elimination.

The weak form is int_Omega lam*div(u)*div(v) + 2*mu*e(u):e(v); with the
degree-2 quadrature rule below it is integrated exactly on affine cells.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .elasticity import ElasticParams, RigidMotion
from .geometry import NeckProfile
from .meshing import BoundaryTag, Mesh, FLOAT_FMT

# degree-2 rule on the reference triangle (weights sum to 1/2)
_QP = np.array([[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]])
_QW = np.array([1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0])

# sample points for per-cell gradient extrema: vertices and edge midpoints
_SAMPLE_BARY = np.array([
    [0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
    [0.5, 0.0], [0.5, 0.5], [0.0, 0.5],
])


class FemError(RuntimeError):
    pass


def _ref_grads(xi_eta: np.ndarray) -> np.ndarray:
    """Reference gradients of the 6 P2 basis functions, shape (q, 6, 2)."""
    pts = np.atleast_2d(xi_eta)
    q = pts.shape[0]
    xi, eta = pts[:, 0], pts[:, 1]
    l1 = 1.0 - xi - eta
    g = np.zeros((q, 6, 2))
    g[:, 0, 0] = -(4.0 * l1 - 1.0)
    g[:, 0, 1] = -(4.0 * l1 - 1.0)
    g[:, 1, 0] = 4.0 * xi - 1.0
    g[:, 2, 1] = 4.0 * eta - 1.0
    g[:, 3, 0] = 4.0 * (l1 - xi)
    g[:, 3, 1] = -4.0 * xi
    g[:, 4, 0] = 4.0 * eta
    g[:, 4, 1] = 4.0 * xi
    g[:, 5, 0] = -4.0 * eta
    g[:, 5, 1] = 4.0 * (l1 - eta)
    return g


class P2Space:
    """Scalar P2 dof layout on a mesh plus cached geometry factors."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        cells = mesh.cells
        pairs = np.sort(np.concatenate([
            cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]
        ]), axis=1)
        uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
        inv = np.asarray(inv).reshape(-1)
        m = cells.shape[0]
        self.edge_nodes = uniq                       # (ne, 2)
        self.cell_edges = np.stack(
            [inv[:m], inv[m:2 * m], inv[2 * m:]], axis=1)
        self.n_vertex = mesh.n_nodes
        self.n_edge = uniq.shape[0]
        self.n_scalar = self.n_vertex + self.n_edge
        self.dof_coords = np.vstack([
            mesh.nodes, 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
        ])
        # (m, 6): vertex dofs then midside dofs in local order 01, 12, 20
        self.cell_dofs = np.concatenate(
            [cells, self.n_vertex + self.cell_edges], axis=1)

        p = mesh.nodes[cells]
        j11 = p[:, 1, 0] - p[:, 0, 0]
        j21 = p[:, 1, 1] - p[:, 0, 1]
        j12 = p[:, 2, 0] - p[:, 0, 0]
        j22 = p[:, 2, 1] - p[:, 0, 1]
        det = j11 * j22 - j12 * j21
        self.det = det
        self.inv_jt = np.empty((m, 2, 2))
        self.inv_jt[:, 0, 0] = j22 / det
        self.inv_jt[:, 0, 1] = -j21 / det
        self.inv_jt[:, 1, 0] = -j12 / det
        self.inv_jt[:, 1, 1] = j11 / det
        self.p0 = p[:, 0, :]
        self.jac = np.stack(
            [np.stack([j11, j12], axis=1), np.stack([j21, j22], axis=1)], axis=1)

        ghat = _ref_grads(_QP)                       # (q, 6, 2)
        # physical gradients at quadrature points: (m, q, 6, 2)
        self.grad_q = np.einsum("mij,qaj->mqai", self.inv_jt, ghat)
        self.wdet = _QW[None, :] * det[:, None]      # (m, q)
        self.quad_xy = (
            self.p0[:, None, :]
            + np.einsum("mij,qj->mqi", self.jac, _QP)
        )

        # boundary scalar dofs per tag (vertices plus midside dofs)
        key = uniq[:, 0] * mesh.n_nodes + uniq[:, 1]
        order = np.argsort(key)
        self._tag_dofs: dict[int, np.ndarray] = {}
        for tag in (BoundaryTag.INCLUSION_TOP, BoundaryTag.INCLUSION_BOTTOM,
                    BoundaryTag.OUTER):
            sel = mesh.edges[mesh.edge_tags == int(tag)]
            if sel.size == 0:
                self._tag_dofs[int(tag)] = np.array([], dtype=np.int64)
                continue
            be = np.sort(sel, axis=1)
            bkey = be[:, 0] * mesh.n_nodes + be[:, 1]
            pos = order[np.searchsorted(key[order], bkey)]
            if np.any(key[pos] != bkey):
                raise FemError("boundary edge missing from mesh edge set")
            dofs = np.concatenate([sel.ravel(), self.n_vertex + pos])
            self._tag_dofs[int(tag)] = np.unique(dofs)
        self.dirichlet_scalar = np.unique(np.concatenate(
            [v for v in self._tag_dofs.values()]))

        self._tree = None
        self._stiffness: dict[tuple[float, float], sp.csr_matrix] = {}

    @classmethod
    def get(cls, mesh: Mesh) -> "P2Space":
        space = getattr(mesh, "_p2_space", None)
        if space is None:
            space = cls(mesh)
            object.__setattr__(mesh, "_p2_space", space)
        return space

    def tag_scalar_dofs(self, tag) -> np.ndarray:
        try:
            return self._tag_dofs[int(tag)]
        except KeyError:
            raise FemError(f"unknown boundary tag {tag!r}") from None

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.mesh.cell_centroids())
        return self._tree

    def stiffness(self, params: ElasticParams) -> sp.csr_matrix:
        key = (params.lam, params.mu)
        if key not in self._stiffness:
            self._stiffness[key] = _assemble_stiffness(self, params)
        return self._stiffness[key]


def _assemble_stiffness(space: P2Space, params: ElasticParams) -> sp.csr_matrix:
    g = space.grad_q                       # (m, q, 6, 2)
    w = space.wdet                          # (m, q)
    lam, mu = params.lam, params.mu
    a1 = np.einsum("mq,mqac,mqbd->macbd", w, g, g)
    dot = np.einsum("mq,mqak,mqbk->mab", w, g, g)
    a3 = np.einsum("mq,mqad,mqbc->macbd", w, g, g)
    k = lam * a1 + mu * a3
    k[:, :, 0, :, 0] += mu * dot
    k[:, :, 1, :, 1] += mu * dot
    m = g.shape[0]
    k = k.reshape(m, 12, 12)

    vdofs = np.empty((m, 12), dtype=np.int64)
    vdofs[:, 0::2] = 2 * space.cell_dofs
    vdofs[:, 1::2] = 2 * space.cell_dofs + 1
    rows = np.repeat(vdofs, 12, axis=1).ravel()
    cols = np.tile(vdofs, (1, 12)).ravel()
    n = 2 * space.n_scalar
    a = sp.coo_matrix((k.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    a.sum_duplicates()
    return a


@dataclass
class SolveReport:
    n_dof: int
    iterations: int
    rel_residual: float
    method: str
    wall_time: float
    bc_error: float = 0.0


@dataclass(frozen=True)
class SolverConfig:
    """PCG with an incomplete-LU preconditioner by default; falls back to a
    direct sparse factorization when the iteration budget is exhausted
    (conditioning in the neck degrades like 1/eps)."""

    method: str = "pcg"          # "pcg" | "direct"
    tol: float = 1e-10
    maxiter: int = 300
    ilu_drop_tol: float = 1e-5
    ilu_fill_factor: float = 20.0


@dataclass
class DisplacementField:
    """Vector P2 field: per-scalar-dof displacement, immutable by convention."""

    space: P2Space
    values: np.ndarray          # (n_scalar, 2)
    order: int = 2
    name: str = "field"

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise FemError(f"field {self.name!r} contains non-finite values")

    def vec(self) -> np.ndarray:
        return self.values.reshape(-1)

    def _binop(self, other, op, name):
        if other.space is not self.space:
            raise FemError("fields live on different meshes")
        return DisplacementField(self.space, op(self.values, other.values), self.order, name)

    def __add__(self, other):
        return self._binop(other, np.add, f"{self.name}+{other.name}")

    def __sub__(self, other):
        return self._binop(other, np.subtract, f"{self.name}-{other.name}")

    def scaled(self, s: float, name: str | None = None):
        return DisplacementField(self.space, s * self.values, self.order,
                                 name or f"{s}*{self.name}")


def _evaluate_bc(bc_spec, points: np.ndarray) -> np.ndarray:
    if isinstance(bc_spec, RigidMotion):
        return bc_spec(points)
    if callable(bc_spec):
        out = np.asarray(bc_spec(points), dtype=float)
        if out.shape != points.shape:
            raise FemError(
                f"boundary data returned shape {out.shape}, expected {points.shape}")
        return out
    arr = np.asarray(bc_spec, dtype=float)
    if arr.ndim == 0 and arr == 0.0:
        return np.zeros_like(points)
    if arr.shape == (2,):
        return np.broadcast_to(arr, points.shape).copy()
    raise FemError(f"cannot interpret boundary data {bc_spec!r}")


class DirichletSolver:
    """Shared-factorization solver for many Dirichlet problems on one mesh.

    All cell problems share the same eliminated operator, so the (possibly
    expensive) factorization or preconditioner is built once and reused.
    """

    def __init__(self, mesh: Mesh, params: ElasticParams,
                 config: SolverConfig | None = None):
        self.space = P2Space.get(mesh)
        self.params = params
        self.config = config or SolverConfig()
        a = self.space.stiffness(params)
        nsc = self.space.n_scalar
        bscalar = self.space.dirichlet_scalar
        bmask = np.zeros(2 * nsc, dtype=bool)
        bmask[2 * bscalar] = True
        bmask[2 * bscalar + 1] = True
        self.bdofs = np.nonzero(bmask)[0]
        self.fdofs = np.nonzero(~bmask)[0]
        self.a_full = a
        self.a_ff = a[self.fdofs][:, self.fdofs].tocsc()
        self.a_fb = a[self.fdofs][:, self.bdofs].tocsr()
        self._lu = None
        self._ilu_op = None
        self._pcg_given_up = False

    def _direct(self):
        if self._lu is None:
            self._lu = spla.splu(self.a_ff)
        return self._lu

    def _precond(self):
        if self._ilu_op is None:
            ilu = spla.spilu(self.a_ff, drop_tol=self.config.ilu_drop_tol,
                             fill_factor=self.config.ilu_fill_factor)
            self._ilu_op = spla.LinearOperator(self.a_ff.shape, ilu.solve)
        return self._ilu_op

    def solve(self, bc: dict, name: str = "v") -> tuple[DisplacementField, SolveReport]:
        t0 = time.perf_counter()
        space = self.space
        required = {int(BoundaryTag.INCLUSION_TOP), int(BoundaryTag.INCLUSION_BOTTOM),
                    int(BoundaryTag.OUTER)}
        given = {int(k) for k in bc}
        if given != required:
            raise FemError(f"bc must cover exactly the tags {sorted(required)}, got {sorted(given)}")

        g = np.zeros((space.n_scalar, 2))
        for tag, spec in bc.items():
            dofs = space.tag_scalar_dofs(tag)
            g[dofs] = _evaluate_bc(spec, space.dof_coords[dofs])

        gb = g.reshape(-1)[self.bdofs]
        rhs = -self.a_fb @ gb
        rhs_norm = float(np.linalg.norm(rhs))

        method = self.config.method
        iterations = 0
        used = method
        if rhs_norm == 0.0:
            x = np.zeros(self.fdofs.size)
            used = "trivial"
        elif method == "pcg" and not self._pcg_given_up:
            count = [0]

            def _cb(_):
                count[0] += 1

            x, info = spla.cg(self.a_ff, rhs, rtol=self.config.tol, atol=0.0,
                              maxiter=self.config.maxiter, M=self._precond(),
                              callback=_cb)
            iterations = count[0]
            if info != 0:
                self._pcg_given_up = True
                x = self._direct().solve(rhs)
                used = "pcg->direct"
            else:
                used = "pcg"
        else:
            x = self._direct().solve(rhs)
            used = "direct"

        res = 0.0
        if rhs_norm > 0.0:
            res = float(np.linalg.norm(self.a_ff @ x - rhs)) / rhs_norm

        full = np.zeros(2 * space.n_scalar)
        full[self.bdofs] = gb
        full[self.fdofs] = x
        field = DisplacementField(space, full.reshape(-1, 2), 2, name)
        report = SolveReport(
            n_dof=self.fdofs.size,
            iterations=iterations,
            rel_residual=res,
            method=used,
            wall_time=time.perf_counter() - t0,
        )
        if res > max(self.config.tol * 10.0, 1e-8):
            raise FemError(
                f"linear solve for {name!r} did not reach tolerance: residual {res:.3e}")
        return field, report


def solve_dirichlet(mesh: Mesh, params: ElasticParams, bc: dict,
                    config: SolverConfig | None = None,
                    name: str = "v") -> tuple[DisplacementField, SolveReport]:
    """One-shot Galerkin solve of the elasticity Dirichlet problem."""
    return DirichletSolver(mesh, params, config).solve(bc, name)


def interpolate(mesh_or_space, fn, name: str = "interp") -> DisplacementField:
    space = mesh_or_space if isinstance(mesh_or_space, P2Space) else P2Space.get(mesh_or_space)
    vals = _evaluate_bc(fn, space.dof_coords)
    return DisplacementField(space, vals, 2, name)


# ---------------------------------------------------------------------------
# regions

@dataclass(frozen=True)
class Region:
    """Measurement region: the neck strip |x1| < r or its complement."""

    kind: str                     # "neck" | "shell" | "all"
    profile: NeckProfile | None = None
    r: float = 0.0

    @classmethod
    def neck(cls, profile: NeckProfile, r: float | None = None) -> "Region":
        return cls("neck", profile, profile.r_neck if r is None else r)

    @classmethod
    def shell_minus_neck(cls, profile: NeckProfile, r: float | None = None) -> "Region":
        return cls("shell", profile, profile.r_neck if r is None else r)

    @classmethod
    def everywhere(cls) -> "Region":
        return cls("all")

    def point_mask(self, pts: np.ndarray) -> np.ndarray:
        if self.kind == "all":
            return np.ones(pts.shape[0], dtype=bool)
        x, y = pts[:, 0], pts[:, 1]
        inside = np.abs(x) < self.r
        xc = np.clip(x, -self.r, self.r)
        tol = 1e-9 * self.profile.r_neck
        inside &= (y >= self.profile.bottom(xc) - tol)
        inside &= (y <= self.profile.top(xc) + tol)
        if self.kind == "neck":
            return inside
        return ~inside

    def cell_mask(self, space: P2Space) -> np.ndarray:
        return self.point_mask(space.mesh.cell_centroids())


def _grads_at(space: P2Space, values: np.ndarray, cells: np.ndarray,
              bary: np.ndarray) -> np.ndarray:
    """Gradients d u_i / d x_j of a P2 field on given cells at reference
    points; returns (len(cells), len(bary), 2, 2)."""
    ghat = _ref_grads(bary)
    gphys = np.einsum("mij,qaj->mqai", space.inv_jt[cells], ghat)
    local = values[space.cell_dofs[cells]]         # (m, 6, 2)
    return np.einsum("mai,mqaj->mqij", local, gphys)


def gradient_at(field: DisplacementField, point) -> np.ndarray:
    """Displacement gradient [du_i/dx_j] at a point inside the shell."""
    space = field.space
    pt = np.asarray(point, dtype=float)
    k = min(64, space.mesh.n_cells)
    _, cand = space.tree.query(pt, k=k)
    cand = np.atleast_1d(cand)
    cell = _locate(space, pt, cand)
    if cell < 0:
        cell = _locate(space, pt, np.arange(space.mesh.n_cells))
    if cell < 0:
        raise FemError(f"point {pt.tolist()} is outside the meshed domain")
    v = space.mesh.nodes[space.mesh.cells[cell]]
    mat = np.stack([v[1] - v[0], v[2] - v[0]], axis=1)
    xi_eta = np.linalg.solve(mat, pt - v[0])
    g = _grads_at(space, field.values, np.array([cell]), xi_eta[None, :])
    return g[0, 0]


def _locate(space: P2Space, pt: np.ndarray, cand: np.ndarray) -> int:
    tol = -1e-10
    for c in cand:
        v = space.mesh.nodes[space.mesh.cells[c]]
        mat = np.stack([v[1] - v[0], v[2] - v[0]], axis=1)
        try:
            xi, eta = np.linalg.solve(mat, pt - v[0])
        except np.linalg.LinAlgError:
            continue
        if xi >= tol and eta >= tol and xi + eta <= 1.0 - tol:
            return int(c)
    return -1


def max_gradient(field: DisplacementField, region: Region) -> tuple[float, np.ndarray]:
    """Max Frobenius norm of the gradient over sample points in the region.

    Samples are the cell vertices and edge midpoints (P2 gradients are linear
    per cell, so vertices carry the per-cell extrema); the reported location
    is the best sample, not a continuous optimizer.
    """
    space = field.space
    cells = np.nonzero(region.cell_mask(space))[0]
    if cells.size == 0:
        raise FemError("empty measurement region")
    g = _grads_at(space, field.values, cells, _SAMPLE_BARY)
    fro = np.sqrt(np.sum(g * g, axis=(2, 3)))       # (m, 6)
    flat = int(np.argmax(fro))
    ci, qi = divmod(flat, _SAMPLE_BARY.shape[0])
    value = float(fro[ci, qi])
    cell = cells[ci]
    v = space.mesh.nodes[space.mesh.cells[cell]]
    b = _SAMPLE_BARY[qi]
    where = v[0] * (1.0 - b[0] - b[1]) + v[1] * b[0] + v[2] * b[1]
    return value, where


def energy_integral(params: ElasticParams, fa: DisplacementField,
                    fb: DisplacementField, region=None) -> float:
    """int (C e(fa), e(fb)) over the region (default: the whole shell)."""
    if fa.space is not fb.space:
        raise FemError("fields live on different meshes")
    space = fa.space
    ga = np.einsum("mai,mqaj->mqij", fa.values[space.cell_dofs], space.grad_q)
    gb = np.einsum("mai,mqaj->mqij", fb.values[space.cell_dofs], space.grad_q)
    ea = 0.5 * (ga + ga.swapaxes(2, 3))
    eb = 0.5 * (gb + gb.swapaxes(2, 3))
    tra = ea[:, :, 0, 0] + ea[:, :, 1, 1]
    trb = eb[:, :, 0, 0] + eb[:, :, 1, 1]
    dens = params.lam * tra * trb + 2.0 * params.mu * np.sum(ea * eb, axis=(2, 3))
    w = space.wdet
    if region is not None:
        pts = space.quad_xy.reshape(-1, 2)
        mask = region.point_mask(pts) if isinstance(region, Region) else region(pts)
        w = w * mask.reshape(w.shape)
    return float(np.sum(w * dens))


def gradient_sq_integral(field: DisplacementField, region=None) -> float:
    """int |grad u|^2 (Frobenius) over the region; used for patch energies."""
    space = field.space
    g = np.einsum("mai,mqaj->mqij", field.values[space.cell_dofs], space.grad_q)
    dens = np.sum(g * g, axis=(2, 3))
    w = space.wdet
    if region is not None:
        pts = space.quad_xy.reshape(-1, 2)
        mask = region.point_mask(pts) if isinstance(region, Region) else region(pts)
        w = w * mask.reshape(w.shape)
    return float(np.sum(w * dens))


def boundary_traction_moment(params: ElasticParams, field: DisplacementField,
                             tag, motion) -> float:
    """Traction moment int_tag (C e(u)) n . psi in the variationally
    consistent (residual-pairing) form.

    The normal n points out of the region the tagged curve encloses: out of
    the inclusion for inclusion boundaries, out of the domain for the outer
    one.  Raw differentiation of the FEM solution on the boundary would lose
    an order of accuracy; pairing the interior residual with an extension of
    psi is exact for the discrete traction functional.
    """
    space = field.space
    dofs = space.tag_scalar_dofs(tag)       # raises on unknown tag
    a = space.stiffness(params)
    r = a @ field.vec()
    psi = _evaluate_bc(motion, space.dof_coords[dofs])
    val = float(np.sum(psi[:, 0] * r[2 * dofs]) + np.sum(psi[:, 1] * r[2 * dofs + 1]))
    if int(tag) == int(BoundaryTag.OUTER):
        return val
    return -val


def export_field(field: DisplacementField, path: str):
    """Columnar plain-text export: dof id, coordinates, displacement."""
    space = field.space
    with open(path, "w", encoding="utf-8") as f:
        f.write("# neckstress-field-v1\n")
        f.write(f"# dofs {space.n_scalar} (vertices {space.n_vertex}, edge midpoints {space.n_edge})\n")
        f.write("# id x y ux uy\n")
        fmt = "%d " + " ".join([FLOAT_FMT] * 4) + "\n"
        for i in range(space.n_scalar):
            x, y = space.dof_coords[i]
            ux, uy = field.values[i]
            f.write(fmt % (i, x, y, ux, uy))
