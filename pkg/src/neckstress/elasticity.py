"""Isotropic elasticity kernel: constitutive tensor, strain, energy pairing,
and the rigid-displacement basis.

The material law is C[A] = lam*tr(A)*I + 2*mu*A for symmetric A, with
ellipticity requiring mu > 0 and d*lam + 2*mu > 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ElasticityError(ValueError):
    pass


@dataclass(frozen=True)
class ElasticParams:
    """Isotropic moduli; ``delta0`` optionally records a two-sided
    ellipticity band delta0 <= mu, d*lam + 2*mu <= 1/delta0 for
    constant-tracking experiments."""

    lam: float
    mu: float
    dim: int = 2
    delta0: float | None = None

    def __post_init__(self):
        if not (self.mu > 0.0):
            raise ElasticityError(f"mu must be positive, got {self.mu}")
        top = self.dim * self.lam + 2.0 * self.mu
        if not (top > 0.0):
            raise ElasticityError(
                f"ellipticity requires d*lam + 2*mu > 0, got {top}")
        if self.delta0 is not None:
            if not (0.0 < self.delta0 <= self.mu and top <= 1.0 / self.delta0):
                raise ElasticityError(
                    f"delta0 = {self.delta0} does not bracket (mu, d*lam+2*mu) "
                    f"= ({self.mu}, {top})")

    def ellipticity_bounds(self):
        """(min, max) of the quadratic form (C[eta], eta)/|eta|^2 on symmetric eta."""
        lo = min(2.0 * self.mu, self.dim * self.lam + 2.0 * self.mu)
        hi = max(2.0 * self.mu, self.dim * self.lam + 2.0 * self.mu)
        return lo, hi


def stiffness_entry(params: ElasticParams, i: int, j: int, k: int, l: int) -> float:
    """Component C_ijkl = lam*d_ij*d_kl + mu*(d_ik*d_jl + d_il*d_jk)."""
    d = lambda a, b: 1.0 if a == b else 0.0
    return params.lam * d(i, j) * d(k, l) + params.mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k))


def _require_symmetric(a: np.ndarray, tol: float = 1e-12):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ElasticityError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > tol * scale:
        raise ElasticityError("matrix is not symmetric")


def lame_apply(params: ElasticParams, a: np.ndarray) -> np.ndarray:
    """Apply the constitutive tensor: lam*tr(a)*I + 2*mu*a (a symmetric)."""
    a = np.asarray(a, dtype=float)
    _require_symmetric(a)
    return params.lam * np.trace(a) * np.eye(a.shape[0]) + 2.0 * params.mu * a


def strain(grad_u: np.ndarray) -> np.ndarray:
    """Symmetric part of a displacement gradient."""
    g = np.asarray(grad_u, dtype=float)
    return 0.5 * (g + g.swapaxes(-1, -2))


def energy_pairing(params: ElasticParams, e_u: np.ndarray, e_v: np.ndarray) -> float:
    """(C[e_u], e_v) for symmetric strains; symmetric in its arguments."""
    e_u = np.asarray(e_u, dtype=float)
    e_v = np.asarray(e_v, dtype=float)
    _require_symmetric(e_u)
    _require_symmetric(e_v)
    return float(
        params.lam * np.trace(e_u) * np.trace(e_v) + 2.0 * params.mu * np.sum(e_u * e_v)
    )


@dataclass(frozen=True)
class RigidMotion:
    """One element of the rigid-displacement basis.

    Translations come first (index 1..d), then infinitesimal rotations
    x_j e_k - x_k e_j with (j, k) in lexicographic order, j < k.  ``index``
    is the 1-based position in that fixed ordering.
    """

    index: int
    dim: int
    translation: int | None = None        # component index for e_i, 0-based
    rotation: tuple[int, int] | None = None  # (j, k) 0-based, j < k

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros_like(pts)
        if self.translation is not None:
            out[:, self.translation] = 1.0
        else:
            j, k = self.rotation
            out[:, k] = pts[:, j]
            out[:, j] = -pts[:, k]
        if np.ndim(points) == 1:
            return out[0]
        return out

    def grad(self) -> np.ndarray:
        """Constant gradient matrix, antisymmetric (zero for translations)."""
        g = np.zeros((self.dim, self.dim))
        if self.rotation is not None:
            j, k = self.rotation
            g[k, j] = 1.0
            g[j, k] = -1.0
        return g


def rigid_basis(dim: int) -> list[RigidMotion]:
    """The d(d+1)/2 rigid motions: d translations then rotations (j<k)."""
    if dim < 2:
        raise ElasticityError("rigid basis requires dim >= 2")
    basis = [RigidMotion(index=i + 1, dim=dim, translation=i) for i in range(dim)]
    idx = dim + 1
    for j in range(dim):
        for k in range(j + 1, dim):
            basis.append(RigidMotion(index=idx, dim=dim, rotation=(j, k)))
            idx += 1
    return basis


def n_rigid(dim: int) -> int:
    return dim * (dim + 1) // 2
