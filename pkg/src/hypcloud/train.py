"""Desk-scale embedding trainer.

Learns one free Euclidean vector per manifest sample plus the adaptive-margin
head by Adam on mean(L_Z) + mean(L_T), reproducing the part-near-center /
whole-near-boundary hierarchy.  Everything is seeded and single-threaded, so
two runs with the same (manifest, config) are bit-identical.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .losses import (
    GradientBundle,
    LossBatch,
    LossReport,
    MarginHead,
    PairExample,
    TripletExample,
    loss_gradients,
)
from .poincare import BALL_EPS, BallPoint, Curvature, clip_to_ball, hyperbolic_norm, log_map_origin
from .synthdata import HierarchyManifest

# Deterministic substream labels.
_REF_STREAM = 2
_EPOCH_STREAM = 3
_EVAL_STREAM = 4

HOLDOUT_FRACTION = 0.2
EVAL_TRIPLETS_PER_ANCHOR = 10


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or parameter."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_triplets: int = 1536
    learning_rate: float = 1e-3
    gamma0: float = 1000.0
    margin_eps: float = 4.0
    dim: int = 16
    seed: int = 42
    curvature_k: float = -0.14
    ball_eps: float = BALL_EPS
    minibatch: int = 32
    init_std: float = 0.01
    reg_space: str = "hyperbolic"
    triplet_metric: str = "tangent"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.batch_triplets < 1 or self.minibatch < 1:
            raise ValueError("batch_triplets and minibatch must be >= 1")

    @property
    def curvature(self) -> Curvature:
        return Curvature(self.curvature_k)


@dataclass
class EmbeddingState:
    """Trainable vectors per sample plus the margin head."""

    table: dict[str, np.ndarray]
    head: MarginHead
    curvature: Curvature
    eps: float
    step: int
    seed: int


def init_state(manifest: HierarchyManifest, config: TrainConfig) -> EmbeddingState:
    """Seeded Gaussian embeddings (std well inside the ball), zero head."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    n = len(manifest.samples)
    block = rng.normal(0.0, config.init_std, size=(n, config.dim))
    table = {s.id: block[i].copy() for i, s in enumerate(manifest.samples)}
    return EmbeddingState(
        table=table,
        head=MarginHead.zeros(2 * config.dim, config.gamma0),
        curvature=config.curvature,
        eps=config.ball_eps,
        step=0,
        seed=config.seed,
    )


# --- batching ---------------------------------------------------------------


def positive_pairs(manifest: HierarchyManifest) -> list[PairExample]:
    return [PairExample(s.id, s.parent_id, s.n_points)
            for s in manifest.samples if s.role == "part"]


def sample_triplets(manifest: HierarchyManifest, count: int,
                    rng: np.random.Generator) -> list[TripletExample]:
    """Anchor wholes uniformly; positives from the anchor's own parts,
    negatives uniformly from parts of other categories."""
    wholes = manifest.wholes()
    parts = [s for s in manifest.samples if s.role == "part"]
    parts_of = manifest.parts_by_whole()
    out = []
    for _ in range(count):
        whole = wholes[int(rng.integers(len(wholes)))]
        own = parts_of[whole.id]
        pos = own[int(rng.integers(len(own)))]
        while True:
            neg = parts[int(rng.integers(len(parts)))]
            if neg.category != whole.category:
                break
        out.append(TripletExample(whole.id, pos.id, neg.id))
    return out


def _chunks(items, size):
    return [items[lo:lo + size] for lo in range(0, len(items), size)]


# --- optimizer --------------------------------------------------------------


@dataclass
class AdamOptimizer:
    """Adam with sparse per-key slots; only keys present in a step's gradient
    dict are updated, and the bias-correction time index is global."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    slots: dict = field(default_factory=dict)

    def update(self, key, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        m, v = self.slots.get(key, (np.zeros_like(value), np.zeros_like(value)))
        m = self.beta1 * m + (1.0 - self.beta1) * grad
        v = self.beta2 * v + (1.0 - self.beta2) * grad * grad
        self.slots[key] = (m, v)
        m_hat = m / (1.0 - self.beta1 ** self.t)
        v_hat = v / (1.0 - self.beta2 ** self.t)
        return value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def train_step(state: EmbeddingState, batch: LossBatch, optimizer: AdamOptimizer,
               config: TrainConfig) -> GradientBundle:
    """One optimizer step on a batch: gradients, Adam updates, ball guard."""
    bundle = loss_gradients(
        batch, state, state.curvature, state.eps, config.margin_eps,
        reg_space=config.reg_space, triplet_metric=config.triplet_metric)
    optimizer.t += 1
    for sid, grad in bundle.embeddings.items():
        updated = optimizer.update(sid, state.table[sid], grad)
        if not np.all(np.isfinite(updated)):
            raise DivergenceError(f"embedding for sample {sid!r} became non-finite "
                                  f"at step {optimizer.t}")
        state.table[sid] = clip_to_ball(updated, state.curvature, state.eps)
    if batch.pairs:
        state.head.weights = optimizer.update("head.weights", state.head.weights,
                                              bundle.head_weights)
        state.head.bias = float(optimizer.update(
            "head.bias", np.float64(state.head.bias), np.float64(bundle.head_bias)))
    if not math.isfinite(bundle.report.total):
        bad = next((s for s, v in state.table.items() if not np.all(np.isfinite(v))), "<unknown>")
        raise DivergenceError(f"non-finite loss at step {optimizer.t}; first bad sample: {bad!r}")
    state.step += 1
    return bundle


def _reference_batch(manifest: HierarchyManifest, config: TrainConfig) -> LossBatch:
    """Fixed seeded batch the loss curve is recorded on each epoch."""
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(_REF_STREAM,)))
    return LossBatch(pairs=tuple(positive_pairs(manifest)),
                     triplets=tuple(sample_triplets(manifest, config.batch_triplets, rng)))


def train(state: EmbeddingState, manifest: HierarchyManifest,
          config: TrainConfig) -> tuple[EmbeddingState, list[LossReport]]:
    """Optimize the state in place for config.epochs; returns it with the
    per-epoch loss curve.

    Each epoch samples batch_triplets fresh triplets plus all positive pairs,
    walks them in fixed-size minibatches, and then records the loss on a fixed
    seeded reference batch so the curve is comparable across epochs (and
    exactly constant at zero learning rate).
    """
    if len(manifest.categories) < 2:
        raise ValueError("triplet mining needs at least 2 categories for negatives")
    pairs = positive_pairs(manifest)
    if not pairs:
        raise ValueError("manifest contains no (part, whole) pairs")
    reference = _reference_batch(manifest, config)
    optimizer = AdamOptimizer(config.learning_rate)
    curve: list[LossReport] = []
    for epoch in range(config.epochs):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=config.seed, spawn_key=(_EPOCH_STREAM, epoch)))
        triplets = sample_triplets(manifest, config.batch_triplets, rng)
        pair_chunks = _chunks(pairs, config.minibatch)
        trip_chunks = _chunks(triplets, config.minibatch)
        for k in range(max(len(pair_chunks), len(trip_chunks))):
            batch = LossBatch(
                pairs=tuple(pair_chunks[k]) if k < len(pair_chunks) else (),
                triplets=tuple(trip_chunks[k]) if k < len(trip_chunks) else ())
            train_step(state, batch, optimizer, config)
        report = loss_gradients(
            reference, state, state.curvature, state.eps, config.margin_eps,
            reg_space=config.reg_space, triplet_metric=config.triplet_metric).report
        if not math.isfinite(report.total):
            raise DivergenceError(f"non-finite reference loss after epoch {epoch}")
        curve.append(report)
    return state, curve


# --- evaluation -------------------------------------------------------------


def _unit_hash(seed: int, sample_id: str) -> float:
    digest = hashlib.sha256(f"{seed}:{sample_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2.0 ** 64


def holdout_anchor_ids(manifest: HierarchyManifest, seed: int,
                       fraction: float = HOLDOUT_FRACTION) -> list[str]:
    """Wholes whose seeded id hash falls below `fraction`; the evaluation
    triplets are anchored here."""
    return [w.id for w in manifest.wholes() if _unit_hash(seed, w.id) < fraction]


def evaluation_triplets(manifest: HierarchyManifest, seed: int) -> list[TripletExample]:
    anchors = set(holdout_anchor_ids(manifest, seed))
    if not anchors:
        # Tiny manifests can hash every whole into the training side.
        anchors = {w.id for w in manifest.wholes()}
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(_EVAL_STREAM,)))
    parts = [s for s in manifest.samples if s.role == "part"]
    parts_of = manifest.parts_by_whole()
    cat_of = {s.id: s.category for s in manifest.samples}
    out = []
    for whole in manifest.wholes():
        if whole.id not in anchors:
            continue
        own = parts_of[whole.id]
        for _ in range(EVAL_TRIPLETS_PER_ANCHOR):
            pos = own[int(rng.integers(len(own)))]
            while True:
                neg = parts[int(rng.integers(len(parts)))]
                if neg.category != cat_of[whole.id]:
                    break
            out.append(TripletExample(whole.id, pos.id, neg.id))
    return out


def evaluate_hierarchy(state: EmbeddingState, manifest: HierarchyManifest) -> dict[str, float]:
    """Quantify the learned hierarchy.

    norm_order_rate: fraction of (part, whole) pairs with the part's
    hyperbolic norm strictly below the whole's.  chain_rate: fraction of
    objects whose parts and whole are fully ordered by norm.  triplet_accuracy:
    fraction of held-out triplets with the anchor closer (in the origin
    tangent space) to its own part than to the foreign part.
    """
    curv = state.curvature
    norms = {sid: hyperbolic_norm(BallPoint(clip_to_ball(vec, curv, state.eps), curv))
             for sid, vec in state.table.items()}
    pairs = positive_pairs(manifest)
    norm_ok = sum(norms[p.part_id] < norms[p.whole_id] for p in pairs)
    chains_ok = 0
    parts_of = manifest.parts_by_whole()
    for whole in manifest.wholes():
        seq = [norms[p.id] for p in parts_of[whole.id]] + [norms[whole.id]]
        chains_ok += all(a < b for a, b in zip(seq, seq[1:]))
    tangents = {sid: log_map_origin(BallPoint(clip_to_ball(vec, curv, state.eps), curv)).coords
                for sid, vec in state.table.items()}
    eval_trips = evaluation_triplets(manifest, state.seed)
    trip_ok = 0
    for trip in eval_trips:
        d_pos = float(np.linalg.norm(tangents[trip.whole_id] - tangents[trip.pos_id]))
        d_neg = float(np.linalg.norm(tangents[trip.whole_id] - tangents[trip.neg_id]))
        trip_ok += d_pos < d_neg
    return {
        "norm_order_rate": norm_ok / len(pairs),
        "chain_rate": chains_ok / len(manifest.wholes()),
        "triplet_accuracy": trip_ok / len(eval_trips) if eval_trips else float("nan"),
    }


def export_disk(state: EmbeddingState, manifest: HierarchyManifest) -> list[dict]:
    """Per-sample unit-disk coordinates for 2-D runs (dim must be 2).

    Ball coordinates are rescaled by sqrt(c) so all outputs lie strictly
    inside the unit circle; rows carry category, role, size and norm.
    """
    dims = {vec.shape[0] for vec in state.table.values()}
    if dims != {2}:
        raise ValueError(
            f"disk export needs 2-D embeddings, got dim(s) {sorted(dims)}; train with dim=2")
    curv = state.curvature
    scale = 1.0 / curv.ball_radius
    rows = []
    for s in manifest.samples:
        coords = clip_to_ball(state.table[s.id], curv, state.eps)
        rows.append({
            "id": s.id,
            "category": s.category,
            "role": s.role,
            "n_points": s.n_points,
            "hnorm": hyperbolic_norm(BallPoint(coords, curv)),
            "x": float(coords[0] * scale),
            "y": float(coords[1] * scale),
        })
    return rows
