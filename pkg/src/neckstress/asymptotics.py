"""Analytic companions to the finite element runs: the explicit gap-linear
auxiliary fields, the scaling laws for the Gram entries, quadrature oracles
for the nearly singular integrals behind those laws, and the predicted
blow-up/boundedness rates.

Scaling-law conventions.  Two families govern every Gram entry:

    rho1(k, m; eps) = 1            if m < k
                      |log eps|    if m = k
                      eps^((k-m)/m)    if m > k

    rho2(k, m; eps) = 1            if m < k
                      |log eps|    if m = k
                      eps^((k-m)/(2m)) if m > k

rho1(k, m) is the eps-scaling of int_0^R r^(k-1) / (eps + kappa0 r^m) dr and
rho2(k, m) that of int_0^R r^(k/2-1) / sqrt(eps + kappa0 r^m) dr, so the
quadrature oracle below can verify both families by slope fitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .elasticity import RigidMotion, n_rigid
from .geometry import ChartError, NeckProfile, ProfileKind


class AsymptoticsError(ValueError):
    pass


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


# ---------------------------------------------------------------------------
# gap-linear auxiliary fields

def vbar(profile: NeckProfile, x) -> float | np.ndarray:
    """Scalar profile (x2 - h2(x1)) / gap(x1): 1 on the top inclusion
    boundary, 0 on the bottom one, linear across the gap."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    x1, x2 = pts[:, 0], pts[:, 1]
    profile._check_chart(x1)
    bot = profile.bottom(x1)
    top = profile.top(x1)
    tol = 1e-9 * (profile.epsilon + profile.r_neck)
    if np.any(x2 < bot - tol) or np.any(x2 > top + tol):
        raise ChartError("point is outside the gap")
    out = (x2 - bot) / (top - bot)
    if np.ndim(x) == 1:
        return float(out[0])
    return out


def vbar_grad(profile: NeckProfile, x) -> np.ndarray:
    """Analytic gradient of vbar; the vertical component is exactly 1/gap."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    x1, x2 = pts[:, 0], pts[:, 1]
    profile._check_chart(x1)
    bot = profile.bottom(x1)
    delta = profile.top(x1) - bot
    db = -profile.dh1(x1)           # h2 = -h1
    dd = 2.0 * profile.dh1(x1)
    g = np.empty_like(pts)
    g[:, 0] = (-db * delta - (x2 - bot) * dd) / (delta * delta)
    g[:, 1] = 1.0 / delta
    if np.ndim(x) == 1:
        return g[0]
    return g


def vtilde(profile: NeckProfile, psi, x) -> np.ndarray:
    """Explicit competitor field psi(x1, top(x1)) * vbar(x) on the chart.

    ``psi`` may be a :class:`RigidMotion` or any callable of points; it is
    evaluated on the top boundary trace, so vtilde equals psi on the top
    inclusion boundary and vanishes on the bottom one.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    vb = np.atleast_1d(vbar(profile, pts))
    trace_pts = np.column_stack([pts[:, 0], profile.top(pts[:, 0])])
    if isinstance(psi, RigidMotion) or callable(psi):
        tv = psi(trace_pts)
    else:
        tv = np.broadcast_to(np.asarray(psi, dtype=float), pts.shape)
    out = tv * vb[:, None]
    if np.ndim(x) == 1:
        return out[0]
    return out


# ---------------------------------------------------------------------------
# scaling laws

def rho(kind: int, k: float, m: float, epsilon: float) -> float:
    """The rho1/rho2 scaling value; the m = k case is the exact |log eps|
    branch with no smoothing between branches."""
    if kind not in (1, 2):
        raise AsymptoticsError(f"rho kind must be 1 or 2, got {kind}")
    if k < 1:
        raise AsymptoticsError(f"rho requires k >= 1, got {k}")
    if m < 2:
        raise AsymptoticsError(f"rho requires m >= 2, got {m}")
    if not (0.0 < epsilon < 0.5):
        raise AsymptoticsError(f"rho requires eps in (0, 1/2), got {epsilon}")
    if m < k:
        return 1.0
    if m == k:
        return abs(math.log(epsilon))
    denom = m if kind == 1 else 2.0 * m
    return epsilon ** ((k - m) / denom)


@dataclass(frozen=True)
class ScalingLaw:
    """eps-dependence of one integrand family: constant, |log eps|, or a
    pure power."""

    exponent: float      # 0 for const and log cases
    has_log: bool

    def value(self, epsilon: float) -> float:
        v = epsilon ** self.exponent
        if self.has_log:
            v *= abs(math.log(epsilon))
        return v


def rho_law(kind: int, k: float, m: float) -> ScalingLaw:
    if m < k:
        return ScalingLaw(0.0, False)
    if m == k:
        return ScalingLaw(0.0, True)
    denom = m if kind == 1 else 2.0 * m
    return ScalingLaw((k - m) / denom, False)


def integral_law(k: float, m: float, p: float) -> ScalingLaw:
    """Predicted eps-scaling of int_0^R r^k/(eps + kappa0 r^m)^p dr.

    The integral is O(1) when p*m < k+1, gains |log eps| exactly at
    p*m = k+1, and scales like eps^((k+1-p*m)/m) beyond.  p = 1 reproduces
    rho1(k+1, m); p = 1/2 reproduces rho2(2(k+1), m).
    """
    crit = p * m
    if crit < k + 1.0 - 1e-12:
        return ScalingLaw(0.0, False)
    if abs(crit - (k + 1.0)) <= 1e-12:
        return ScalingLaw(0.0, True)
    return ScalingLaw((k + 1.0 - crit) / m, False)


# ---------------------------------------------------------------------------
# quadrature oracle

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}

ORACLE_POWERS = (0.5, 1.0, 2.0, 3.0)


def _gl(n: int):
    if n not in _GL_CACHE:
        x, w = leggauss(n)
        _GL_CACHE[n] = (x, w)
    return _GL_CACHE[n]


def _panel(f, a: float, b: float, n: int) -> float:
    x, w = _gl(n)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return half * float(np.sum(w * f(mid + half * x)))


def _adaptive_panel(f, a, b, rel_tol, floor, depth=0):
    coarse = _panel(f, a, b, 10)
    fine = _panel(f, a, b, 20)
    if abs(fine - coarse) <= rel_tol * max(abs(fine), floor):
        return fine
    if depth >= 30:
        raise QuadratureError(
            f"quadrature did not converge on [{a:.3e}, {b:.3e}]")
    mid = 0.5 * (a + b)
    return (_adaptive_panel(f, a, mid, rel_tol, floor, depth + 1)
            + _adaptive_panel(f, mid, b, rel_tol, floor, depth + 1))


def singular_integral_oracle(k: float, m: float, p: float, epsilon: float,
                             r_max: float = 1.0, kappa0: float = 1.0,
                             rel_tol: float = 1e-8) -> float:
    """int_0^r_max r^k / (eps + kappa0 r^m)^p dr by composite adaptive
    Gauss-Legendre quadrature with panels subdividing geometrically toward
    r = 0, where the integrand is nearly singular at scale (eps/kappa0)^(1/m).
    """
    if k < 0:
        raise AsymptoticsError(f"k must be >= 0, got {k}")
    if m < 2:
        raise AsymptoticsError(f"m must be >= 2, got {m}")
    if p not in ORACLE_POWERS:
        raise AsymptoticsError(f"power p must be one of {ORACLE_POWERS}, got {p}")
    if epsilon <= 0 or r_max <= 0:
        raise AsymptoticsError("epsilon and r_max must be positive")

    def f(r):
        return r ** k / (epsilon + kappa0 * r ** m) ** p

    r_star = (epsilon / kappa0) ** (1.0 / m)
    breaks = [0.0]
    r = min(r_star, r_max)
    while r < r_max:
        breaks.append(r)
        r *= 2.0
    breaks.append(r_max)

    pieces = [
        _adaptive_panel(f, a, b, rel_tol, 1e-300)
        for a, b in zip(breaks[:-1], breaks[1:])
    ]
    return math.fsum(pieces)


# ---------------------------------------------------------------------------
# flat-contact Gram entry envelopes

def flat_entry_oracle(d: int, sigma: float, epsilon: float,
                      entry: tuple[int, int]) -> float:
    """Upper-bound envelope for the a11 entry (alpha, beta) of a flat-contact
    geometry with flat-set measure ``sigma``, up to the universal constant.

    Translation indices are 1..d, rotations d+1..d(d+1)/2.  The d = 2 table
    and the ball-shaped d >= 3 table are supported; anything else raises.
    """
    if d < 2:
        raise AsymptoticsError("d >= 2 required")
    if sigma < 0:
        raise AsymptoticsError("flat-set measure must be >= 0")
    if not (0.0 < epsilon < 0.5):
        raise AsymptoticsError(f"epsilon must be in (0, 1/2), got {epsilon}")
    n = n_rigid(d)
    al, be = sorted(entry)
    if not (1 <= al <= n and 1 <= be <= n):
        raise AsymptoticsError(f"entry {entry} out of range for d={d}")
    log = abs(math.log(epsilon))
    rs = math.sqrt(epsilon)

    if d == 2:
        if al == be:
            if al <= 2:
                return sigma / epsilon + 1.0 / rs
            return sigma ** 3 / epsilon + 1.0
        if (al, be) == (1, 2):
            return sigma / rs + log
        # mixed translation-rotation
        return sigma ** 2 / rs + 1.0

    q = (d + 1.0) / (d - 1.0)
    if al == be:
        if al <= d:
            if d == 3:
                return sigma / epsilon + log
            return sigma / epsilon + 1.0
        return sigma ** q / epsilon + 1.0
    if be <= d:
        return sigma / rs + sigma ** ((d - 2.0) / (d - 1.0)) * log + 1.0
    if al <= d:
        return sigma ** (d / (d - 1.0)) / rs + sigma * log + 1.0
    return sigma ** q / rs + sigma ** (d / (d - 1.0)) * log + 1.0


# ---------------------------------------------------------------------------
# rate predictions

@dataclass(frozen=True)
class RatePrediction:
    """Predicted eps-rate of the maximal displacement gradient.

    ``exponent`` is the power of eps (0 means bounded) and ``log_factor``
    the exponent of |log eps| in the predicted size, so the prediction is
    eps**exponent * |log eps|**log_factor.  ``geometry`` echoes the case:
    ("power", m) or ("flat", flat-set measure).
    """

    dim: int
    regime: str
    exponent: float
    log_factor: int = 0
    geometry: tuple = ()

    def value(self, epsilon: float) -> float:
        return epsilon ** self.exponent * abs(math.log(epsilon)) ** self.log_factor


def predicted_rate(d: int, geometry) -> RatePrediction:
    """Rate table as a function of dimension and geometry.

    ``geometry`` is a :class:`NeckProfile`, or a tuple ("flat", sigma) /
    ("power", m).  A flat geometry with positive flat-set measure is
    bounded; zero measure degenerates to order m = 2.
    """
    kind, value = _geometry_key(geometry)
    if d < 2:
        raise AsymptoticsError("d >= 2 required")
    if kind == "flat":
        if value > 0.0:
            return RatePrediction(d, "flat-bounded", 0.0, 0, ("flat", value))
        return predicted_rate(d, ("power", 2.0))
    m = value
    if m < 2:
        raise AsymptoticsError("m >= 2 required")
    geo = ("power", m)
    if m < d - 1:
        return RatePrediction(d, "m<d-1", -1.0, 0, geo)
    if m == d - 1:
        return RatePrediction(d, "m=d-1", -1.0, -1, geo)
    if m < d + 1:
        return RatePrediction(d, "d-1<m<d+1", -min(1.0 - 1.0 / m, (d - 1.0) / m), 0, geo)
    if m == d + 1:
        return RatePrediction(d, "m=d+1", -(1.0 - 1.0 / m), -1, geo)
    return RatePrediction(d, "m>d+1", -d / m, 0, geo)


def _geometry_key(geometry):
    if isinstance(geometry, NeckProfile):
        if geometry.kind is ProfileKind.FLAT:
            return "flat", geometry.flat_measure
        return "power", geometry.m
    kind, value = geometry
    return str(kind).lower(), float(value)


def pointwise_bound(d: int, geometry, epsilon: float, x_prime,
                    phi_norm: float = 1.0, constant: float = 1.0):
    """Pointwise gradient envelope at lateral offset x_prime.

    Returns the envelope shape (without the universal
    constant; callers supply a fitted ``constant``).  Flat geometries use
    dist(x', flat set); order-m ones use |x'|^m.
    """
    kind, value = _geometry_key(geometry)
    x = np.abs(np.asarray(x_prime, dtype=float))
    eps = float(epsilon)
    log = abs(math.log(eps))

    if kind == "flat" and value > 0.0:
        sigma = value
        r0 = _flat_radius(d, sigma)
        dist = np.maximum(x - r0, 0.0)
        den = eps + dist ** 2
        if d == 2:
            out = (eps / (sigma + math.sqrt(eps))) / den \
                + (eps / (sigma ** 3 + eps)) * x / den
        elif d == 3:
            out = (eps / (sigma + eps * log)) / den \
                + (eps / (sigma ** 2 + eps)) * x / den
        else:
            q = (d + 1.0) / (d - 1.0)
            out = (eps / (sigma + eps)) / den + (eps / (sigma ** q + eps)) * x / den
        return constant * phi_norm * out

    m = 2.0 if kind == "flat" else value
    den = eps + x ** m
    if m < d - 1:
        out = 1.0 / den
    elif m == d - 1:
        out = 1.0 / (log * den) + x / den + 1.0
    elif m < d + 1:
        out = eps ** (1.0 - (d - 1.0) / m) / den + x / den + 1.0
    elif m == d + 1:
        out = eps ** (1.0 - (d - 1.0) / m) / den + x / (log * den) + 1.0
    else:
        out = eps ** (1.0 - (d - 1.0) / m) / den \
            + eps ** (1.0 - (d + 1.0) / m) * x / den + 1.0
    return constant * phi_norm * out


def _flat_radius(d: int, sigma: float) -> float:
    """Radius of the (d-1)-ball with measure sigma."""
    k = d - 1
    unit = math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0)
    return (sigma / unit) ** (1.0 / k)


def gram_integral_cases(d: int) -> list[tuple[int, float, int, int]]:
    """The (k, p) integrand pairs behind the Gram-entry scaling laws, as
    (k, p, rho_kind, rho_k) rows: translation/rotation diagonals give the
    p = 1 family, the off-diagonal boundary terms the p = 1/2 family."""
    if d < 2:
        raise AsymptoticsError("d >= 2 required")
    return [
        (d - 2, 1.0, 1, d - 1),
        (d, 1.0, 1, d + 1),
        (d - 2, 0.5, 2, 2 * (d - 1)),
        (d - 1, 0.5, 2, 2 * d),
        (d, 0.5, 2, 2 * (d + 1)),
    ]
