"""Boundary-fitted graded triangulation of the shell between two inclusions.

Mesh layout (d = 2 only):

* Neck block, |x1| <= r_neck: a tensor-product grid of quads split into
  triangles.  Column widths are proportional to the local gap length scale,
  so they shrink toward the thinnest part of the gap (the origin for Power
  profiles, the flat-set edge for Flat ones) with bounded geometric growth
  away from it; each column carries ``n_layers`` element layers spanning the
  local gap, so element heights scale with gap(x1).
* Closure arcs: each inclusion is closed by a circular arc meeting the neck
  curve tangentially at |x1| = r_neck.
* Outer region: the blob made of the two inclusions plus the neck is
  star-shaped about the origin, so the remaining shell is meshed by rings of
  nodes on straight rays from the blob boundary to the outer circle, graded
  radially.  The ray rings share the mouth-segment nodes of the neck block,
  which makes the whole triangulation conforming.

The neck block is built exactly mirror-symmetric in x1 (mirrored node
coordinates and mirrored diagonals), so symmetric problems stay symmetric at
the discrete level.
"""

from __future__ import annotations

import enum
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import NeckProfile, ProfileKind

logger = logging.getLogger(__name__)

FLOAT_FMT = "%.17g"


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """z-component of the cross product of stacked 2-vectors."""
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class MeshingError(RuntimeError):
    """Mesh generation failed; the message names the offending region."""


class BoundaryTag(enum.IntEnum):
    INCLUSION_TOP = 1     # boundary of the upper inclusion D1
    INCLUSION_BOTTOM = 2  # boundary of the lower inclusion D2
    OUTER = 3             # outer boundary of D


@dataclass(frozen=True)
class GradingConfig:
    """Mesh resolution knobs.

    ``dx_min_frac`` sets the finest neck column width as a fraction of the
    profile's gap length scale; ``dx_max_frac`` and ``arc_frac`` are caps
    relative to r_neck.  ``budget_scale`` refines everything uniformly
    (budget x4 corresponds to budget_scale = 2).  ``seed`` is recorded for
    the determinism contract; generation itself is deterministic.
    """

    n_layers: int = 4
    dx_min_frac: float = 0.2
    dx_max_frac: float = 0.05
    arc_frac: float = 0.06
    n_radial: int = 10
    radial_ratio: float = 1.4
    max_cells: int = 200_000
    budget_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_layers < 1:
            raise MeshingError("n_layers must be >= 1")
        if not (0.0 < self.dx_min_frac <= 1.0):
            raise MeshingError("dx_min_frac must be in (0, 1]")
        if self.budget_scale < 1.0:
            raise MeshingError("budget_scale must be >= 1")

    def refined(self, budget_factor: float) -> "GradingConfig":
        """Config with the cell budget scaled by ``budget_factor`` (>= 1)."""
        s = math.sqrt(budget_factor)
        return replace(self, budget_scale=self.budget_scale * s)

    @property
    def layers(self) -> int:
        return max(1, round(self.n_layers * self.budget_scale))

    def radial_levels(self, ray_length: float, first_gap: float,
                      gap_cap: float) -> np.ndarray:
        """Normalized ring positions in (0, 1]: geometric growth from
        ``first_gap`` capped at ``gap_cap``, with at least ``n_radial`` rings.

        Deriving the ring count from the target spacings keeps cell shapes
        invariant under budget scaling."""
        g = self.radial_ratio
        incs = []
        total, d = 0.0, first_gap
        while total < ray_length:
            step = min(d, gap_cap)
            incs.append(step)
            total += step
            d *= g
        while len(incs) < self.n_radial:
            incs.append(incs[-1])
            total += incs[-1]
        s = np.cumsum(incs)
        return s / s[-1]


@dataclass
class GradingReport:
    n_nodes: int = 0
    n_cells: int = 0
    n_neck_cells: int = 0
    min_layers: int = 0
    max_layers: int = 0
    min_quality: float = 0.0
    dx_min: float = 0.0
    dx_max: float = 0.0


@dataclass
class Mesh:
    """Triangulation with tagged boundary edges.

    ``nodes`` is (n, 2), ``cells`` (m, 3) with positive orientation,
    ``edges`` (k, 2) the boundary edges with tags in ``edge_tags``.
    Cells [0, n_neck_cells) are the neck block.  Immutable after
    construction (arrays are set read-only).
    """

    nodes: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    edge_tags: np.ndarray
    grading_report: GradingReport
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for a in (self.nodes, self.cells, self.edges, self.edge_tags):
            a.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def cell_centroids(self) -> np.ndarray:
        return self.nodes[self.cells].mean(axis=1)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.cells]
        return 0.5 * cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def triangle_quality(nodes: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Shape quality 4*sqrt(3)*area / sum(edge^2), 1 for equilateral."""
    p = nodes[cells]
    area = 0.5 * np.abs(cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]))
    l2 = (
        np.sum((p[:, 1] - p[:, 0]) ** 2, axis=1)
        + np.sum((p[:, 2] - p[:, 1]) ** 2, axis=1)
        + np.sum((p[:, 0] - p[:, 2]) ** 2, axis=1)
    )
    return 4.0 * math.sqrt(3.0) * area / l2


# ---------------------------------------------------------------------------
# column grading

def _local_scale(profile: NeckProfile, x: float) -> float:
    """Lateral length scale of the gap at x: the distance over which gap(x)
    changes by an O(1) factor.  Smallest at the gap minimum."""
    if profile.kind is ProfileKind.POWER:
        delta = profile.epsilon + profile.kappa0 * abs(x) ** profile.m
        return (delta / profile.kappa0) ** (1.0 / profile.m)
    d = abs(x) - profile.r0     # signed distance to the flat-set edge
    return math.sqrt(profile.epsilon / profile.kappa0 + d * d)


def _local_walk(profile: NeckProfile, start: float, stop: float,
                frac: float, dx_max: float):
    """Positions from start toward stop with step = frac * local gap scale,
    capped by dx_max.

    The local scale is 1-Lipschitz, so consecutive widths grow by at most
    the geometric factor 1 + frac; anchoring the walk at the gap minimum or
    flat-set edge keeps the worst cell aspect there, invariant under budget
    scaling.
    """
    direction = 1.0 if stop > start else -1.0
    pts = [start]
    while True:
        step = min(frac * _local_scale(profile, pts[-1]), dx_max)
        step = max(step, 1e-7 * profile.r_neck)
        nxt = pts[-1] + direction * step
        if (stop - nxt) * direction <= 0.0:
            break
        pts.append(nxt)
    # land exactly on stop without widening any cell beyond its nominal step:
    # a short remainder is split evenly over the final two cells
    if len(pts) >= 2 and abs(stop - pts[-1]) < 0.5 * abs(pts[-1] - pts[-2]):
        pts[-1] = 0.5 * (pts[-2] + stop)
    pts.append(stop)
    return np.array(pts)


def _neck_columns(profile: NeckProfile, config: GradingConfig) -> np.ndarray:
    """Symmetric x1 grid on [-r_neck, r_neck], graded toward the gap minimum
    (Power) or the flat-set edge (Flat)."""
    s = config.budget_scale
    xc = profile.r_neck
    dx_max = config.dx_max_frac * xc / s
    frac = config.dx_min_frac / s
    if profile.kind is ProfileKind.FLAT and profile.r0 > 0.0:
        inner = _local_walk(profile, profile.r0, 0.0, frac, dx_max)
        outer = _local_walk(profile, profile.r0, xc, frac, dx_max)
        half = np.concatenate([inner[::-1], outer[1:]])
    else:
        half = _local_walk(profile, 0.0, xc, frac, dx_max)
    return np.concatenate([-half[::-1][:-1], half])


# ---------------------------------------------------------------------------
# closure arcs

def closure_arc(profile: NeckProfile):
    """Center height and radius of the tangent closure circle of D1.

    The arc passes through (+-r_neck, y_t) with y_t = eps + h1(r_neck) and
    matches the slope of the neck curve there, which puts its center on the
    x2 axis at c = y_t + r_neck/h1'(r_neck).  D2's arc is the reflection of
    D1's through the mid-gap line: (x, y) -> (x, eps - y).
    """
    xc = profile.r_neck
    yt = profile.top(xc)
    slope = float(profile.dh1(xc))
    if slope <= 0.0:
        raise MeshingError("neck curve has no positive slope at the chart cut")
    c = yt + xc / slope
    rad = math.hypot(xc, yt - c)
    return c, rad


def _arc_interior_nodes(profile: NeckProfile, config: GradingConfig):
    """Interior sample points of the top closure arc, right junction to left.

    Built from a half-arc and mirrored so the coordinates are exactly
    symmetric in x1.
    """
    c, rad = closure_arc(profile)
    xc = profile.r_neck
    yt = profile.top(xc)
    phi_r = math.atan2(yt - c, xc)
    span = math.pi - 2.0 * phi_r
    target = config.arc_frac * profile.r_neck / config.budget_scale
    n_int = max(9, int(math.ceil(rad * span / target)))
    k = (n_int + 1) // 2
    psi = phi_r + (np.arange(1, k + 1) / k) * (math.pi / 2.0 - phi_r)
    right = np.column_stack([rad * np.cos(psi), c + rad * np.sin(psi)])
    right[-1, 0] = 0.0  # apex exactly on the axis
    left = right[:-1][::-1].copy()
    left[:, 0] = -left[:, 0]
    return np.vstack([right, left])


# ---------------------------------------------------------------------------
# mesh builder

def build_mesh(profile: NeckProfile, config: GradingConfig | None = None) -> Mesh:
    """Triangulate the shell for a 2-d profile.

    Raises :class:`MeshingError` when the grading cannot be met within
    ``config.max_cells`` or when the generated blob boundary fails the
    star-shapedness check.
    """
    if config is None:
        config = GradingConfig()
    if profile.dim != 2:
        raise MeshingError("meshing supports dim = 2 only")

    layers = config.layers
    xs = _neck_columns(profile, config)
    nx = xs.size
    arc_top = _arc_interior_nodes(profile, config)
    n_arc = arc_top.shape[0]
    n_ring = 2 * (layers + 1) + 2 * n_arc
    arc_h = config.arc_frac * profile.r_neck / config.budget_scale
    # far-field cap keeps the outermost radial gaps comparable to the
    # circumferential widths there
    gap_cap = arc_h * profile.outer_radius / profile.r_neck
    s_levels = config.radial_levels(profile.outer_radius, arc_h, gap_cap)
    n_radial = s_levels.size
    est_cells = 2 * (nx - 1) * layers + 2 * n_ring * n_radial
    if est_cells > config.max_cells:
        raise MeshingError(
            f"grading needs about {est_cells} cells (> budget {config.max_cells}); "
            f"neck columns={nx}, ring nodes={n_ring}"
        )

    # --- neck block ---------------------------------------------------------
    tops = profile.top(xs)
    bots = profile.bottom(xs)
    t = np.linspace(0.0, 1.0, layers + 1)
    neck_xy = np.empty((nx, layers + 1, 2))
    neck_xy[:, :, 0] = xs[:, None]
    neck_xy[:, :, 1] = bots[:, None] + t[None, :] * (tops - bots)[:, None]
    nid = np.arange(nx * (layers + 1)).reshape(nx, layers + 1)

    neck_cells = []
    mids = 0.5 * (xs[:-1] + xs[1:])
    for i in range(nx - 1):
        for j in range(layers):
            a, b = nid[i, j], nid[i + 1, j]
            cc, d = nid[i + 1, j + 1], nid[i, j + 1]
            if mids[i] >= 0.0:   # diagonal a-cc; mirrored on the other side
                neck_cells.append((a, b, cc))
                neck_cells.append((a, cc, d))
            else:
                neck_cells.append((a, b, d))
                neck_cells.append((b, cc, d))
    neck_cells = np.array(neck_cells, dtype=np.int64)

    nodes = [neck_xy.reshape(-1, 2)]
    next_id = nx * (layers + 1)

    arc_top_ids = np.arange(next_id, next_id + n_arc)
    nodes.append(arc_top)
    next_id += n_arc
    arc_bot = arc_top.copy()
    arc_bot[:, 1] = profile.epsilon - arc_bot[:, 1]
    arc_bot_ids = np.arange(next_id, next_id + n_arc)
    nodes.append(arc_bot)
    next_id += n_arc

    # --- blob boundary ring, counterclockwise -------------------------------
    ring0 = np.concatenate([
        nid[nx - 1, :],            # right mouth, bottom to top
        arc_top_ids,               # top arc, right to left
        nid[0, ::-1],              # left mouth, top to bottom
        arc_bot_ids[::-1],         # bottom arc, left to right
    ])
    all_nodes = np.vstack(nodes)
    ring_xy = all_nodes[ring0]
    theta = np.unwrap(np.arctan2(ring_xy[:, 1], ring_xy[:, 0]))
    dtheta = np.diff(theta)
    if np.any(dtheta <= 0.0):
        bad = ring_xy[np.argmin(dtheta)]
        raise MeshingError(
            f"inner boundary is not star-shaped about the origin near "
            f"({bad[0]:.3g}, {bad[1]:.3g}); adjust closure or outer radius"
        )

    # --- radial rings to the outer circle ------------------------------------
    n0 = ring0.size
    dirs = ring_xy / np.linalg.norm(ring_xy, axis=1, keepdims=True)
    outer_pts = profile.outer_radius * dirs
    n_r = n_radial

    ring_ids = [ring0]
    for s in s_levels:
        pts = ring_xy + s * (outer_pts - ring_xy)
        ids = np.arange(next_id, next_id + n0)
        nodes.append(pts)
        ring_ids.append(ids)
        next_id += n0

    ann_cells = []
    for k in range(n_r):
        inner, outer = ring_ids[k], ring_ids[k + 1]
        for i in range(n0):
            j = (i + 1) % n0
            # ccw sector boundary: inner_i -> outer_i -> outer_j -> inner_j
            a, b, cc, d = inner[i], outer[i], outer[j], inner[j]
            ann_cells.append((a, b, cc))
            ann_cells.append((a, cc, d))
    ann_cells = np.array(ann_cells, dtype=np.int64)

    all_nodes = np.vstack(nodes)
    all_cells = np.vstack([neck_cells, ann_cells])

    # --- boundary edges -------------------------------------------------------
    top_chain = np.concatenate([[nid[nx - 1, layers]], arc_top_ids, [nid[0, layers]]])
    bot_chain = np.concatenate([[nid[0, 0]], arc_bot_ids[::-1], [nid[nx - 1, 0]]])
    edges = []
    tags = []

    def _chain(ids, tag, close=False):
        n = len(ids)
        stop = n if close else n - 1
        for i in range(stop):
            edges.append((ids[i], ids[(i + 1) % n]))
            tags.append(tag)

    _chain(nid[:, layers], BoundaryTag.INCLUSION_TOP)
    _chain(top_chain, BoundaryTag.INCLUSION_TOP)
    _chain(nid[:, 0], BoundaryTag.INCLUSION_BOTTOM)
    _chain(bot_chain, BoundaryTag.INCLUSION_BOTTOM)
    _chain(ring_ids[-1], BoundaryTag.OUTER, close=True)

    edges = np.array(edges, dtype=np.int64)
    tags = np.array(tags, dtype=np.int8)

    # --- validation and report -------------------------------------------------
    p = all_nodes[all_cells]
    areas = 0.5 * cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    if np.any(areas <= 0.0):
        i = int(np.argmin(areas))
        c = p[i].mean(axis=0)
        raise MeshingError(
            f"degenerate or inverted cell near ({c[0]:.4g}, {c[1]:.4g})"
        )

    dx = np.diff(xs)
    report = GradingReport(
        n_nodes=all_nodes.shape[0],
        n_cells=all_cells.shape[0],
        n_neck_cells=neck_cells.shape[0],
        min_layers=layers,
        max_layers=layers,
        min_quality=float(triangle_quality(all_nodes, all_cells).min()),
        dx_min=float(dx.min()),
        dx_max=float(dx.max()),
    )
    c_top, rad = closure_arc(profile)
    meta = {
        "x_cut": profile.r_neck,
        "arc_center_y": c_top,
        "arc_radius": rad,
        "n_layers": layers,
        "n_neck_cells": int(neck_cells.shape[0]),
        "profile_kind": profile.kind.value,
        "epsilon": profile.epsilon,
        "kappa0": profile.kappa0,
        "m": 0.0 if profile.m is None else profile.m,
        "r0": profile.r0,
        "r_neck": profile.r_neck,
        "outer_radius": profile.outer_radius,
        "seed": config.seed,
    }
    mesh = Mesh(all_nodes, all_cells, edges, tags, report, meta)
    validate_mesh(mesh)
    logger.debug(
        "mesh: %d nodes, %d cells (%d neck), min quality %.3g",
        report.n_nodes, report.n_cells, report.n_neck_cells, report.min_quality,
    )
    return mesh


def validate_mesh(mesh: Mesh):
    """Structural invariants: orientation, tag integrity, closed tag curves."""
    if np.any(mesh.signed_areas() <= 0.0):
        raise MeshingError("mesh contains non-positively-oriented cells")
    if mesh.edges.shape[0] != mesh.edge_tags.shape[0]:
        raise MeshingError("boundary edge/tag count mismatch")
    if np.any(mesh.edge_tags <= 0):
        raise MeshingError("untagged boundary edge")
    # every tagged edge set must be a union of closed curves: node degrees even
    for tag in np.unique(mesh.edge_tags):
        sel = mesh.edges[mesh.edge_tags == tag]
        ids, counts = np.unique(sel.ravel(), return_counts=True)
        if np.any(counts != 2):
            raise MeshingError(f"boundary curve for tag {tag} is not closed")
    # boundary edges must be edges of exactly one cell
    cell_edges = np.concatenate([
        mesh.cells[:, [0, 1]], mesh.cells[:, [1, 2]], mesh.cells[:, [2, 0]]
    ])
    cell_edges = np.sort(cell_edges, axis=1)
    keys = cell_edges[:, 0] * mesh.n_nodes + cell_edges[:, 1]
    uniq, counts = np.unique(keys, return_counts=True)
    count_of = dict(zip(uniq.tolist(), counts.tolist()))
    be = np.sort(mesh.edges, axis=1)
    for a, b in be:
        if count_of.get(int(a) * mesh.n_nodes + int(b), 0) != 1:
            raise MeshingError(f"tagged edge ({a},{b}) is not a boundary edge")


# ---------------------------------------------------------------------------
# uniform refinement

def refine_uniform(mesh: Mesh, profile: NeckProfile | None = None) -> Mesh:
    """Split every triangle into four; snap boundary midpoints to the curves.

    With ``profile`` given, new midpoints of tagged edges are projected onto
    the analytic boundary (neck curve, closure arc or outer circle); without
    it the refinement is purely affine.
    """
    nodes = mesh.nodes
    cells = mesh.cells
    pairs = np.sort(np.concatenate([
        cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]
    ]), axis=1)
    uniq, inv = np.unique(pairs, axis=0, return_inverse=True)
    inv = np.asarray(inv).reshape(-1)
    mid_ids = mesh.n_nodes + np.arange(uniq.shape[0])
    mids = 0.5 * (nodes[uniq[:, 0]] + nodes[uniq[:, 1]])

    edge_key = {}
    for i, (a, b) in enumerate(np.sort(mesh.edges, axis=1)):
        edge_key[(int(a), int(b))] = i

    if profile is not None:
        xc = mesh.meta["x_cut"]
        cy = mesh.meta["arc_center_y"]
        rad = mesh.meta["arc_radius"]
        for i, (a, b) in enumerate(uniq):
            tag_idx = edge_key.get((int(a), int(b)))
            if tag_idx is None:
                continue
            tag = int(mesh.edge_tags[tag_idx])
            x, y = mids[i]
            if tag == BoundaryTag.OUTER:
                r = math.hypot(x, y)
                mids[i] = (profile.outer_radius / r) * mids[i]
            elif tag == BoundaryTag.INCLUSION_TOP:
                if abs(x) <= xc * (1.0 + 1e-12) and y <= cy:
                    mids[i, 1] = profile.top(min(max(x, -xc), xc))
                else:
                    v = mids[i] - np.array([0.0, cy])
                    mids[i] = np.array([0.0, cy]) + (rad / np.linalg.norm(v)) * v
            else:
                cy2 = profile.epsilon - cy
                if abs(x) <= xc * (1.0 + 1e-12) and y >= cy2:
                    mids[i, 1] = profile.bottom(min(max(x, -xc), xc))
                else:
                    v = mids[i] - np.array([0.0, cy2])
                    mids[i] = np.array([0.0, cy2]) + (rad / np.linalg.norm(v)) * v

    m01 = mid_ids[inv[: len(cells)]]
    m12 = mid_ids[inv[len(cells): 2 * len(cells)]]
    m20 = mid_ids[inv[2 * len(cells):]]
    a, b, c = cells[:, 0], cells[:, 1], cells[:, 2]
    new_cells = np.concatenate([
        np.stack([a, m01, m20], axis=1),
        np.stack([m01, b, m12], axis=1),
        np.stack([m20, m12, c], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ], axis=0)
    # keep children of cell i contiguous so the neck block stays a prefix
    new_cells = new_cells.reshape(4, len(cells), 3).transpose(1, 0, 2).reshape(-1, 3)

    new_edges = []
    new_tags = []
    for (a0, b0), tag in zip(mesh.edges, mesh.edge_tags):
        key = (int(min(a0, b0)), int(max(a0, b0)))
        row = np.nonzero((uniq[:, 0] == key[0]) & (uniq[:, 1] == key[1]))[0][0]
        mid = mid_ids[row]
        new_edges.append((a0, mid))
        new_edges.append((mid, b0))
        new_tags += [tag, tag]

    new_nodes = np.vstack([nodes, mids])
    new_edges = np.array(new_edges, dtype=np.int64)
    new_tags = np.array(new_tags, dtype=np.int8)
    meta = dict(mesh.meta)
    meta["n_neck_cells"] = 4 * mesh.meta["n_neck_cells"]

    report = GradingReport(
        n_nodes=new_nodes.shape[0],
        n_cells=new_cells.shape[0],
        n_neck_cells=meta["n_neck_cells"],
        min_layers=2 * mesh.grading_report.min_layers,
        max_layers=2 * mesh.grading_report.max_layers,
        min_quality=float(triangle_quality(new_nodes, new_cells).min()),
        dx_min=0.5 * mesh.grading_report.dx_min,
        dx_max=0.5 * mesh.grading_report.dx_max,
    )
    out = Mesh(new_nodes, new_cells, new_edges, new_tags, report, meta)
    validate_mesh(out)
    return out


# ---------------------------------------------------------------------------
# plain-text serialization

def save_mesh(mesh: Mesh, path: str):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_mesh(mesh))


def dumps_mesh(mesh: Mesh) -> str:
    buf = io.StringIO()
    buf.write("# neckstress-mesh-v1\n")
    buf.write(f"nodes {mesh.n_nodes}\n")
    for x, y in mesh.nodes:
        buf.write((FLOAT_FMT + " " + FLOAT_FMT + "\n") % (x, y))
    buf.write(f"cells {mesh.n_cells}\n")
    for a, b, c in mesh.cells:
        buf.write(f"{a} {b} {c}\n")
    buf.write(f"edges {mesh.edges.shape[0]}\n")
    for (a, b), tag in zip(mesh.edges, mesh.edge_tags):
        buf.write(f"{a} {b} {int(tag)}\n")
    buf.write(f"meta {len(mesh.meta)}\n")
    for k in sorted(mesh.meta):
        v = mesh.meta[k]
        if isinstance(v, float):
            buf.write(("%s = " + FLOAT_FMT + "\n") % (k, v))
        else:
            buf.write(f"{k} = {v}\n")
    return buf.getvalue()


def load_mesh(path: str) -> Mesh:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != "# neckstress-mesh-v1":
        raise MeshingError(f"{path}: not a neckstress mesh file")
    i = 1

    def _block(name):
        nonlocal i
        head = lines[i].split()
        if head[0] != name:
            raise MeshingError(f"{path}: expected '{name}' block, got {lines[i]!r}")
        n = int(head[1])
        rows = lines[i + 1: i + 1 + n]
        i += 1 + n
        return rows

    nodes = np.array([[float(v) for v in r.split()] for r in _block("nodes")])
    cells = np.array([[int(v) for v in r.split()] for r in _block("cells")], dtype=np.int64)
    erows = [[int(v) for v in r.split()] for r in _block("edges")]
    edges = np.array([[a, b] for a, b, _ in erows], dtype=np.int64)
    tags = np.array([t for _, _, t in erows], dtype=np.int8)
    meta = {}
    for r in _block("meta"):
        k, v = (s.strip() for s in r.split("=", 1))
        if k in ("n_layers", "n_neck_cells", "seed"):
            meta[k] = int(v)
        elif k == "profile_kind":
            meta[k] = v
        else:
            meta[k] = float(v)

    report = GradingReport(
        n_nodes=nodes.shape[0],
        n_cells=cells.shape[0],
        n_neck_cells=int(meta.get("n_neck_cells", 0)),
        min_layers=int(meta.get("n_layers", 0)),
        max_layers=int(meta.get("n_layers", 0)),
        min_quality=float(triangle_quality(nodes, cells).min()),
    )
    mesh = Mesh(nodes, cells, edges, tags, report, meta)
    validate_mesh(mesh)
    return mesh
