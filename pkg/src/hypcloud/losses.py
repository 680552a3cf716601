"""Training objectives: hinge regularizer with adaptive margin, triplet loss,
their composition, exact analytic gradients, and a finite-difference harness.

Gradients are written out by hand (chain rule through the ball projection,
the origin log map, and the hyperbolic norm) and verified against central
finite differences; see `gradient_check_cases`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .poincare import (
    BALL_EPS,
    BallPoint,
    Curvature,
    clip_to_ball,
    clip_vjp,
    geodesic_distance,
    geodesic_distance_grad,
    hyperbolic_norm,
    hyperbolic_norm_grad,
    log_map_origin,
    log_map_origin_vjp,
)

# Keeps the produced margin strictly inside (0, gamma0) even when the
# sigmoid saturates in float64.
SIGMOID_CLIP = 1e-15

REG_SPACES = ("hyperbolic", "euclidean")
TRIPLET_METRICS = ("tangent", "geodesic")


def sigmoid(a: float) -> float:
    """Numerically stable logistic, clipped away from exact 0 and 1."""
    if a >= 0:
        s = 1.0 / (1.0 + math.exp(-a))
    else:
        e = math.exp(a)
        s = e / (1.0 + e)
    return min(max(s, SIGMOID_CLIP), 1.0 - SIGMOID_CLIP)


@dataclass
class MarginHead:
    """Affine head producing the adaptive margin gamma0 * sigmoid(w.l + b)."""

    weights: np.ndarray
    bias: float
    gamma0: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1:
            raise ValueError("head weights must be a 1-D vector")
        if not (math.isfinite(self.gamma0) and self.gamma0 > 0):
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")

    @classmethod
    def zeros(cls, feature_dim: int, gamma0: float) -> "MarginHead":
        return cls(np.zeros(feature_dim), 0.0, gamma0)


@dataclass(frozen=True)
class LossReport:
    """Loss components; total = l_n + l_z + l_t exactly."""

    l_z: float
    l_t: float
    l_n: float
    total: float


def total_loss(l_z: float, l_t: float, l_n_external: float = 0.0) -> LossReport:
    """Compose the loss components into a report."""
    if l_z < 0 or l_t < 0:
        raise ValueError("hinge losses cannot be negative")
    return LossReport(l_z=l_z, l_t=l_t, l_n=l_n_external, total=l_n_external + l_z + l_t)


def adaptive_margin(p_feat: np.ndarray, w_feat: np.ndarray, head: MarginHead) -> float:
    """gamma0 * sigmoid(w . concat(p, w) + b); strictly inside (0, gamma0)."""
    feats = np.concatenate([np.asarray(p_feat, dtype=np.float64).ravel(),
                            np.asarray(w_feat, dtype=np.float64).ravel()])
    if feats.shape[0] != head.weights.shape[0]:
        raise ValueError(
            f"feature dimension {feats.shape[0]} does not match head width {head.weights.shape[0]}")
    return head.gamma0 * sigmoid(float(head.weights @ feats) + head.bias)


def reg_loss(part_emb: BallPoint, whole_emb: BallPoint, gamma: float, n_points: int) -> float:
    """Hinge pushing the whole's hyperbolic norm above the part's by gamma/N."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    if part_emb.curvature != whole_emb.curvature:
        raise ValueError("part and whole embeddings must share a curvature")
    return max(0.0, -hyperbolic_norm(whole_emb) + hyperbolic_norm(part_emb) + gamma / n_points)


def triplet_loss(
    w_pos: BallPoint,
    p_pos: BallPoint,
    p_neg: BallPoint,
    margin_eps: float,
    metric: str = "tangent",
) -> float:
    """Hinge separating the anchor's own part from a foreign part by margin_eps.

    The distance is Euclidean between origin-tangent images by default; the
    ball geodesic alternative is available via `metric="geodesic"`.
    """
    if margin_eps <= 0:
        raise ValueError(f"margin_eps must be positive, got {margin_eps}")
    if not (w_pos.curvature == p_pos.curvature == p_neg.curvature):
        raise ValueError("triplet embeddings must share a curvature")
    if metric == "tangent":
        tw = log_map_origin(w_pos).coords
        d_pos = float(np.linalg.norm(tw - log_map_origin(p_pos).coords))
        d_neg = float(np.linalg.norm(tw - log_map_origin(p_neg).coords))
    elif metric == "geodesic":
        d_pos = geodesic_distance(w_pos, p_pos)
        d_neg = geodesic_distance(w_pos, p_neg)
    else:
        raise ValueError(f"metric must be one of {TRIPLET_METRICS}, got {metric!r}")
    return max(0.0, d_pos - d_neg + margin_eps)


# --- batched loss + gradients ----------------------------------------------


@dataclass(frozen=True)
class PairExample:
    """A (part, whole) positive pair for the regularizer; N is the part size."""

    part_id: str
    whole_id: str
    n_points: int


@dataclass(frozen=True)
class TripletExample:
    """Anchor whole, a part of the same object, and a foreign-category part."""

    whole_id: str
    pos_id: str
    neg_id: str


@dataclass(frozen=True)
class LossBatch:
    pairs: tuple[PairExample, ...] = ()
    triplets: tuple[TripletExample, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "triplets", tuple(self.triplets))


@dataclass
class GradientBundle:
    """Gradients of mean(L_Z) + mean(L_T) for one batch."""

    embeddings: dict[str, np.ndarray]
    head_weights: np.ndarray
    head_bias: float
    report: LossReport


def _norm_and_grad(emb: np.ndarray, curv: Curvature, reg_space: str):
    if reg_space == "hyperbolic":
        return hyperbolic_norm(BallPoint(emb, curv)), hyperbolic_norm_grad(emb, curv)
    r = float(np.linalg.norm(emb))
    grad = emb / r if r > 0 else np.zeros_like(emb)
    return r, grad


def loss_gradients(
    batch: LossBatch,
    state,
    curv: Curvature,
    eps: float = BALL_EPS,
    margin_eps: float = 4.0,
    *,
    reg_space: str = "hyperbolic",
    triplet_metric: str = "tangent",
) -> GradientBundle:
    """Exact analytic gradients of mean(L_Z) + mean(L_T) over the batch.

    `state` must expose `table` (sample id -> trainable vector) and `head`
    (a MarginHead).  The trainable vectors double as the margin head's input
    features.  Hinge subgradients are zero at kinks; the ball projection
    contributes the identity inside the margin radius and the exact Jacobian
    of the radial rescaling outside it.
    """
    if reg_space not in REG_SPACES:
        raise ValueError(f"reg_space must be one of {REG_SPACES}, got {reg_space!r}")
    if triplet_metric not in TRIPLET_METRICS:
        raise ValueError(f"triplet_metric must be one of {TRIPLET_METRICS}, got {triplet_metric!r}")
    if not batch.pairs and not batch.triplets:
        raise ValueError("loss batch is empty")
    table = state.table
    head = state.head
    dim = next(iter(table.values())).shape[0]
    if batch.pairs and head.weights.shape[0] != 2 * dim:
        raise ValueError(
            f"head width {head.weights.shape[0]} does not match embedding dim {dim} (need 2*dim)")

    grads: dict[str, np.ndarray] = {}
    gw = np.zeros_like(head.weights)
    gb = 0.0

    def accumulate(sid: str, g: np.ndarray):
        if sid in grads:
            grads[sid] += g
        else:
            grads[sid] = g.copy()

    lz_sum = 0.0
    n_pairs = len(batch.pairs)
    for pair in batch.pairs:
        theta_p = table[pair.part_id]
        theta_w = table[pair.whole_id]
        emb_p = clip_to_ball(theta_p, curv, eps)
        emb_w = clip_to_ball(theta_w, curv, eps)
        feats = np.concatenate([theta_p, theta_w])
        act = float(head.weights @ feats) + head.bias
        sig = sigmoid(act)
        gamma = head.gamma0 * sig
        h_p, dh_p = _norm_and_grad(emb_p, curv, reg_space)
        h_w, dh_w = _norm_and_grad(emb_w, curv, reg_space)
        val = -h_w + h_p + gamma / pair.n_points
        if val <= 0.0:
            continue
        lz_sum += val
        scale = 1.0 / n_pairs
        accumulate(pair.part_id, scale * clip_vjp(dh_p, theta_p, curv, eps))
        accumulate(pair.whole_id, scale * clip_vjp(-dh_w, theta_w, curv, eps))
        dsig = head.gamma0 * sig * (1.0 - sig) / pair.n_points
        gw += (scale * dsig) * feats
        gb += scale * dsig
        accumulate(pair.part_id, (scale * dsig) * head.weights[:dim])
        accumulate(pair.whole_id, (scale * dsig) * head.weights[dim:])

    lt_sum = 0.0
    n_triplets = len(batch.triplets)
    for trip in batch.triplets:
        theta = {sid: table[sid] for sid in (trip.whole_id, trip.pos_id, trip.neg_id)}
        emb = {sid: clip_to_ball(t, curv, eps) for sid, t in theta.items()}
        if triplet_metric == "tangent":
            tan = {sid: log_map_origin(BallPoint(e, curv)).coords for sid, e in emb.items()}
            diff_pos = tan[trip.whole_id] - tan[trip.pos_id]
            diff_neg = tan[trip.whole_id] - tan[trip.neg_id]
            d_pos = float(np.linalg.norm(diff_pos))
            d_neg = float(np.linalg.norm(diff_neg))
            val = d_pos - d_neg + margin_eps
            if val <= 0.0:
                continue
            lt_sum += val
            u_pos = diff_pos / d_pos if d_pos > 0 else np.zeros(dim)
            u_neg = diff_neg / d_neg if d_neg > 0 else np.zeros(dim)
            tangent_grads = {
                trip.whole_id: u_pos - u_neg,
                trip.pos_id: -u_pos,
                trip.neg_id: u_neg,
            }
            scale = 1.0 / n_triplets
            for sid, g_t in tangent_grads.items():
                g_e = log_map_origin_vjp(g_t, emb[sid], curv)
                accumulate(sid, scale * clip_vjp(g_e, theta[sid], curv, eps))
        else:
            e_w, e_p, e_n = emb[trip.whole_id], emb[trip.pos_id], emb[trip.neg_id]
            d_pos = geodesic_distance(BallPoint(e_w, curv), BallPoint(e_p, curv))
            d_neg = geodesic_distance(BallPoint(e_w, curv), BallPoint(e_n, curv))
            val = d_pos - d_neg + margin_eps
            if val <= 0.0:
                continue
            lt_sum += val
            gpx, gpy = geodesic_distance_grad(e_w, e_p, curv)
            gnx, gny = geodesic_distance_grad(e_w, e_n, curv)
            ball_grads = {trip.whole_id: gpx - gnx, trip.pos_id: gpy, trip.neg_id: -gny}
            scale = 1.0 / n_triplets
            for sid, g_e in ball_grads.items():
                accumulate(sid, scale * clip_vjp(g_e, theta[sid], curv, eps))

    report = total_loss(
        lz_sum / n_pairs if n_pairs else 0.0,
        lt_sum / n_triplets if n_triplets else 0.0,
    )
    return GradientBundle(embeddings=grads, head_weights=gw, head_bias=gb, report=report)


# --- finite-difference verification ----------------------------------------


def grad_check(fn, grad: np.ndarray, point: np.ndarray, h: float = 1e-6) -> float:
    """Max relative error of `grad` vs central differences of `fn` at `point`.

    Per coordinate: |analytic - central| / max(1, |central|).  The caller is
    responsible for keeping `point` away from hinge kinks.
    """
    if not (1e-9 < h < 1e-3):
        raise ValueError(f"step h must lie in (1e-9, 1e-3), got {h}")
    point = np.asarray(point, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != point.shape:
        raise ValueError("gradient and point shapes differ")
    worst = 0.0
    for j in range(point.shape[0]):
        shift = np.zeros_like(point)
        shift[j] = h
        central = (fn(point + shift) - fn(point - shift)) / (2.0 * h)
        worst = max(worst, abs(grad[j] - central) / max(1.0, abs(central)))
    return worst


class _FrozenState:
    """Minimal stand-in for an embedding state in the check harness."""

    def __init__(self, table: dict[str, np.ndarray], head: MarginHead):
        self.table = table
        self.head = head


def _interior_point(rng: np.random.Generator, dim: int, curv: Curvature) -> np.ndarray:
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    return rng.uniform(0.05, 0.7) * curv.ball_radius * direction


def gradient_check_cases(
    seed: int,
    n_cases: int,
    h: float = 1e-6,
    *,
    flip_sign: bool = False,
) -> list[tuple[str, float]]:
    """Finite-difference checks over seeded hinge-active configurations.

    Cycles through a geodesic pair, a regularizer pair, and a triplet.  Kinks
    are excluded by construction: margins are chosen so the hinge argument
    stays at least 1e-3 from zero.  `flip_sign` negates one analytic
    coordinate per case; it exists so the harness can prove it would catch a
    wrong gradient.
    """
    if n_cases < 1:
        raise ValueError("n_cases must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(17,)))
    results = []
    for case in range(n_cases):
        kind = ("geodesic", "reg_pair", "triplet")[case % 3]
        curv = Curvature(-float(rng.uniform(0.1, 1.5)))
        dim = int(rng.integers(2, 8))
        if kind == "geodesic":
            x = _interior_point(rng, dim, curv)
            y = _interior_point(rng, dim, curv)
            gx, gy = geodesic_distance_grad(x, y, curv)
            analytic = np.concatenate([gx, gy])

            def fn(v, dim=dim, curv=curv):
                return geodesic_distance(BallPoint(v[:dim], curv), BallPoint(v[dim:], curv))

            point = np.concatenate([x, y])
        elif kind == "reg_pair":
            head = MarginHead(rng.normal(scale=0.3, size=2 * dim), float(rng.normal(scale=0.5)),
                              float(rng.uniform(1.0, 1000.0)))
            n_points = int(rng.integers(1, 1000))
            for _ in range(200):
                theta_p = _interior_point(rng, dim, curv)
                theta_w = _interior_point(rng, dim, curv)
                state = _FrozenState({"p": theta_p, "w": theta_w}, head)
                batch = LossBatch(pairs=(PairExample("p", "w", n_points),))
                bundle = loss_gradients(batch, state, curv)
                if bundle.report.l_z > 1e-3:
                    break
            analytic = np.concatenate([
                bundle.embeddings["p"], bundle.embeddings["w"],
                bundle.head_weights, [bundle.head_bias]])

            def fn(v, dim=dim, curv=curv, head=head, n_points=n_points):
                trial_head = MarginHead(v[2 * dim:4 * dim], float(v[4 * dim]), head.gamma0)
                trial = _FrozenState({"p": v[:dim], "w": v[dim:2 * dim]}, trial_head)
                out = loss_gradients(
                    LossBatch(pairs=(PairExample("p", "w", n_points),)), trial, curv)
                return out.report.l_z

            point = np.concatenate([theta_p, theta_w, head.weights, [head.bias]])
        else:
            theta = [_interior_point(rng, dim, curv) for _ in range(3)]
            head = MarginHead.zeros(2 * dim, 1.0)
            state = _FrozenState({"w": theta[0], "p": theta[1], "n": theta[2]}, head)
            t = {k: log_map_origin(BallPoint(clip_to_ball(v, curv), curv)).coords
                 for k, v in state.table.items()}
            d_pos = float(np.linalg.norm(t["w"] - t["p"]))
            d_neg = float(np.linalg.norm(t["w"] - t["n"]))
            margin = max(1e-2, d_neg - d_pos + float(rng.uniform(0.5, 2.0)))
            batch = LossBatch(triplets=(TripletExample("w", "p", "n"),))
            bundle = loss_gradients(batch, state, curv, margin_eps=margin)
            analytic = np.concatenate([bundle.embeddings[k] for k in ("w", "p", "n")])

            def fn(v, dim=dim, curv=curv, head=head, margin=margin):
                trial = _FrozenState(
                    {"w": v[:dim], "p": v[dim:2 * dim], "n": v[2 * dim:]}, head)
                out = loss_gradients(
                    LossBatch(triplets=(TripletExample("w", "p", "n"),)), trial, curv,
                    margin_eps=margin)
                return out.report.l_t

            point = np.concatenate(theta)
        if flip_sign:
            analytic = analytic.copy()
            analytic[0] = -analytic[0] - 1.0
        results.append((kind, grad_check(fn, analytic, point, h)))
    return results
