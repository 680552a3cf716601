"""Poincare-ball geometry: projection, Mobius addition, log map, geodesics.

All operations use the positive curvature magnitude c = |k| internally, with
the ball of radius 1/sqrt(c).  Everything is float64; points are kept strictly
inside the ball by `clip_to_ball`, which is bit-exactly idempotent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BALL_EPS = 1e-5


class NumericalDomainError(ArithmeticError):
    """Raised when arctanh would be evaluated at an argument >= 1."""


@dataclass(frozen=True)
class Curvature:
    """Negative curvature k of the ball; c = |k|, radius = 1/sqrt(c)."""

    k: float

    def __post_init__(self):
        if not math.isfinite(self.k) or self.k >= 0:
            raise ValueError(f"curvature k must be finite and strictly negative, got {self.k}")

    @property
    def c(self) -> float:
        return -self.k

    @property
    def ball_radius(self) -> float:
        return 1.0 / math.sqrt(self.c)


@dataclass(frozen=True)
class BallPoint:
    """A point strictly inside the Poincare ball of the given curvature."""

    coords: np.ndarray
    curvature: Curvature

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 1:
            raise ValueError(f"BallPoint coords must be a 1-D vector, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("BallPoint coords must be finite")
        c = self.curvature.c
        if c * float(coords @ coords) >= 1.0:
            raise ValueError(
                f"point with norm {np.linalg.norm(coords)} lies outside the ball "
                f"of radius {self.curvature.ball_radius}"
            )
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class TangentVector:
    """A vector in the tangent space at the ball's origin."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 1 or not np.all(np.isfinite(coords)):
            raise ValueError("TangentVector coords must be a finite 1-D vector")
        object.__setattr__(self, "coords", coords)


def _check_eps(eps: float):
    if not (0.0 < eps < 0.1):
        raise ValueError(f"eps must lie in (0, 0.1), got {eps}")


def clip_to_ball(x: np.ndarray, curv: Curvature, eps: float = BALL_EPS) -> np.ndarray:
    """Radially clip vectors (last axis) to norm (1-eps)/sqrt(c).

    Vectors already strictly inside that radius are returned unchanged;
    clipped vectors are rescaled onto the margin radius.  The operation is
    bit-exactly idempotent: re-clipping never changes the output again.
    """
    _check_eps(eps)
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot project non-finite coordinates")
    rho = (1.0 - eps) * curv.ball_radius
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    if not np.any(r >= rho):
        return x.copy()
    out = x.copy()
    # Rescale rows at or outside the margin.  A row exactly at rho scales by
    # 1.0 (identity); rows that land an ulp above rho after rounding are
    # rescaled again so the result never exceeds rho.
    over = r >= rho
    while True:
        r = np.linalg.norm(out, axis=-1, keepdims=True)
        bad = over & (r > rho)
        if not np.any(bad):
            break
        scale = np.where(bad, rho / np.where(r > 0.0, r, 1.0), 1.0)
        scale = np.where(bad & (scale == 1.0), np.nextafter(1.0, 0.0), scale)
        out = out * scale
    return out


def project_to_ball(x: np.ndarray, curv: Curvature, eps: float = BALL_EPS) -> BallPoint:
    """Map an arbitrary vector into the ball (identity if already inside)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("project_to_ball expects a single vector")
    return BallPoint(clip_to_ball(x, curv, eps), curv)


def _mobius_raw(z: np.ndarray, x: np.ndarray, c: float) -> np.ndarray:
    zx = float(z @ x)
    z2 = float(z @ z)
    x2 = float(x @ x)
    num = (1.0 + 2.0 * c * zx + c * x2) * z + (1.0 - c * z2) * x
    den = 1.0 + 2.0 * c * zx + c * c * z2 * x2
    return num / den


def mobius_add(z: BallPoint, x: BallPoint, eps: float = BALL_EPS) -> BallPoint:
    """Gyrovector addition z (+) x on the shared ball."""
    if z.curvature != x.curvature:
        raise ValueError(f"curvature mismatch: {z.curvature} vs {x.curvature}")
    c = z.curvature.c
    raw = _mobius_raw(z.coords, x.coords, c)
    # Floating-point error can push near-boundary results onto or past the
    # boundary; clip only in that case so interior results stay untouched.
    if not np.all(np.isfinite(raw)) or c * float(raw @ raw) >= 1.0:
        raw = clip_to_ball(raw, z.curvature, eps)
    return BallPoint(raw, z.curvature)


def log_map_origin(x: BallPoint) -> TangentVector:
    """Logarithmic map at the origin: (1/sqrt(c)) arctanh(sqrt(c)|x|) x/|x|."""
    c = x.curvature.c
    r = float(np.linalg.norm(x.coords))
    if r == 0.0:
        return TangentVector(np.zeros_like(x.coords))
    sc = math.sqrt(c)
    scale = math.atanh(sc * r) / (sc * r)
    return TangentVector(scale * x.coords)


def geodesic_distance(x: BallPoint, y: BallPoint) -> float:
    """Ball geodesic distance (2/sqrt(c)) arctanh(sqrt(c) |(-x)(+)y|)."""
    if x.curvature != y.curvature:
        raise ValueError(f"curvature mismatch: {x.curvature} vs {y.curvature}")
    if np.array_equal(x.coords, y.coords):
        return 0.0
    c = x.curvature.c
    m = mobius_add(BallPoint(-x.coords, x.curvature), y)
    sc = math.sqrt(c)
    arg = sc * float(np.linalg.norm(m.coords))
    if arg >= 1.0:
        raise NumericalDomainError(f"arctanh argument {arg} >= 1 for valid ball points")
    return (2.0 / sc) * math.atanh(arg)


def hyperbolic_norm(x: BallPoint) -> float:
    """Geodesic distance from the origin; the hierarchy-level scalar."""
    c = x.curvature.c
    sc = math.sqrt(c)
    arg = sc * float(np.linalg.norm(x.coords))
    if arg >= 1.0:
        raise NumericalDomainError(f"arctanh argument {arg} >= 1 for a valid ball point")
    return (2.0 / sc) * math.atanh(arg)


def conformal_factor(z: BallPoint) -> float:
    """Metric scaling lambda(z) = 2 / (1 - c |z|^2); equals 2 at the origin."""
    c = z.curvature.c
    return 2.0 / (1.0 - c * float(z.coords @ z.coords))


# --- batched helpers -------------------------------------------------------
#
# The pairwise geodesic matrix uses the closed form
#     |(-x)(+)y|^2 = |x - y|^2 / (1 - 2c<x,y> + c^2 |x|^2 |y|^2)
# built from elementwise operations only, so D(X, Y) == D(Y, X).T bit-exactly.


def hyperbolic_norms(xs: np.ndarray, curv: Curvature) -> np.ndarray:
    """Row-wise hyperbolic norms of ball coordinates, shape (n,)."""
    xs = np.asarray(xs, dtype=np.float64)
    sc = math.sqrt(curv.c)
    args = sc * np.linalg.norm(xs, axis=-1)
    if np.any(args >= 1.0):
        raise NumericalDomainError("a row lies on or outside the ball boundary")
    return (2.0 / sc) * np.arctanh(args)


def geodesic_distance_matrix(
    xs: np.ndarray,
    ys: np.ndarray,
    curv: Curvature,
    chunk: int = 256,
    workers: int = 1,
) -> np.ndarray:
    """Dense pairwise geodesic distances between ball coordinate rows.

    Entries are computed independently from symmetric elementwise
    expressions, so transposing the arguments transposes the result
    bit-exactly and the diagonal of D(X, X) is exactly zero.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    c = curv.c
    sc = math.sqrt(c)
    x2 = (xs * xs).sum(axis=-1)
    y2 = (ys * ys).sum(axis=-1)

    def rows(lo: int, hi: int) -> np.ndarray:
        xc = xs[lo:hi]
        dot = (xc[:, None, :] * ys[None, :, :]).sum(axis=-1)
        sq = ((xc[:, None, :] - ys[None, :, :]) ** 2).sum(axis=-1)
        den = (1.0 - (2.0 * c) * dot) + (c * c) * (x2[lo:hi, None] * y2[None, :])
        arg = sc * np.sqrt(sq / den)
        if np.any(arg >= 1.0):
            raise NumericalDomainError("arctanh argument >= 1; input rows must lie inside the ball")
        return (2.0 / sc) * np.arctanh(arg)

    return _map_row_chunks(rows, xs.shape[0], ys.shape[0], chunk, workers)


def _map_row_chunks(fn, n_rows: int, n_cols: int, chunk: int, workers: int) -> np.ndarray:
    """Assemble a row-chunked matrix, optionally computing chunks in threads.

    Chunks are written back in index order, so the result is identical for
    any worker count.
    """
    bounds = [(lo, min(lo + chunk, n_rows)) for lo in range(0, n_rows, chunk)]
    out = np.empty((n_rows, n_cols), dtype=np.float64)
    if workers <= 1 or len(bounds) <= 1:
        for lo, hi in bounds:
            out[lo:hi] = fn(lo, hi)
        return out
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for (lo, hi), block in zip(bounds, pool.map(lambda b: fn(*b), bounds)):
            out[lo:hi] = block
    return out


# --- analytic derivatives --------------------------------------------------


def hyperbolic_norm_grad(x: np.ndarray, curv: Curvature) -> np.ndarray:
    """Gradient of hyperbolic_norm at ball coordinates x (zero at the origin)."""
    x = np.asarray(x, dtype=np.float64)
    c = curv.c
    r = float(np.linalg.norm(x))
    if r == 0.0:
        return np.zeros_like(x)
    return (2.0 / ((1.0 - c * r * r) * r)) * x


def log_map_origin_vjp(upstream: np.ndarray, x: np.ndarray, curv: Curvature) -> np.ndarray:
    """Pull a tangent-space gradient back through the origin log map at x.

    The Jacobian is g(r) I + (g'(r)/r) x x^T with
    g(r) = arctanh(sqrt(c) r) / (sqrt(c) r); at x = 0 it is the identity.
    """
    x = np.asarray(x, dtype=np.float64)
    c = curv.c
    r = float(np.linalg.norm(x))
    if r == 0.0:
        return np.array(upstream, dtype=np.float64, copy=True)
    sc = math.sqrt(c)
    at = math.atanh(sc * r)
    g = at / (sc * r)
    gp = (r / (1.0 - c * r * r) - at / sc) / (r * r)
    return g * upstream + (gp / r) * float(x @ upstream) * x


def clip_vjp(upstream: np.ndarray, x: np.ndarray, curv: Curvature, eps: float = BALL_EPS) -> np.ndarray:
    """Pull a gradient back through clip_to_ball at the pre-projection point x.

    Identity strictly inside the margin radius; the exact Jacobian of the
    radial rescaling (rho/r)(I - xhat xhat^T) on or outside it.
    """
    x = np.asarray(x, dtype=np.float64)
    rho = (1.0 - eps) * curv.ball_radius
    r = float(np.linalg.norm(x))
    if r < rho:
        return np.array(upstream, dtype=np.float64, copy=True)
    xhat = x / r
    return (rho / r) * (upstream - float(xhat @ upstream) * xhat)


def geodesic_distance_grad(
    x: np.ndarray, y: np.ndarray, curv: Curvature
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of the geodesic distance wrt both ball points.

    Uses the closed form d = (2/sqrt(c)) arctanh(sqrt(c) sqrt(q/D)) with
    q = |x-y|^2 and D = 1 - 2c<x,y> + c^2 |x|^2 |y|^2.  Returns the zero
    subgradient at x == y (the distance has a norm-like kink there).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    c = curv.c
    diff = x - y
    q = float(diff @ diff)
    if q == 0.0:
        return np.zeros_like(x), np.zeros_like(y)
    x2 = float(x @ x)
    y2 = float(y @ y)
    den = 1.0 - 2.0 * c * float(x @ y) + c * c * x2 * y2
    s = math.sqrt(q / den)
    pref = 2.0 / ((1.0 - c * s * s) * s * den * den)
    gx = pref * (diff * den - q * (c * c * y2 * x - c * y))
    gy = pref * (-diff * den - q * (c * c * x2 * y - c * x))
    return gx, gy
