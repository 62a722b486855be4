"""Contrastive (siamese) embedding network over window feature vectors.

Two identical branches share one parameter set (input -> 128 ReLU -> 64 ReLU
-> 32 linear); their outputs are compared with Euclidean distance and trained
with the contrastive loss y*d^2 + (1-y)*max(0, margin-d)^2 so that windows of
the same activity embed close together and different activities end up at
least ``margin`` apart.

Gradient conventions at non-smooth points: the ReLU derivative at 0 is 0;
the y=1 branch is differentiated as d^2 (no 1/d factor), and the y=0 branch
contributes zero gradient when d == 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import nn
from .errors import ConfigurationError, ShapeError, TrainingDivergedError
from .features import FeaturePipeline, FeatureVariant

HIDDEN_SIZES = (128, 64)
EMBEDDING_DIM = 32


@dataclass
class SnnTrainConfig:
    margin: float = 1.0
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 0.001
    seed: int = 0
    pairs_per_anchor: int = 1  # positives and negatives per anchor, each

    def __post_init__(self):
        if self.margin <= 0:
            raise ConfigurationError(f"margin must be > 0, got {self.margin}")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ConfigurationError("epochs >= 0, batch_size >= 1 and learning_rate > 0 required")
        if self.pairs_per_anchor < 1:
            raise ConfigurationError("pairs_per_anchor must be >= 1")


@dataclass(frozen=True)
class TrainPair:
    """Indices of two feature rows and their similarity label (1 = same class)."""

    ia: int
    ib: int
    y: int


def init_embedder(input_dim: int, rng: np.random.Generator) -> nn.MlpParams:
    return nn.init_mlp((input_dim,) + HIDDEN_SIZES + (EMBEDDING_DIM,), rng)


def embed(params: nn.MlpParams, features: np.ndarray) -> np.ndarray:
    """Forward a feature vector (or batch) to its embedding."""
    out, _ = nn.forward(params, features)
    return out


def pair_distance(e_a: np.ndarray, e_b: np.ndarray) -> float:
    e_a = np.asarray(e_a, dtype=np.float64)
    e_b = np.asarray(e_b, dtype=np.float64)
    if e_a.shape != e_b.shape or e_a.ndim != 1:
        raise ShapeError(f"embedding shapes differ: {e_a.shape} vs {e_b.shape}")
    return float(np.linalg.norm(e_a - e_b))


def contrastive_loss(distance: float, y: int, margin: float = 1.0) -> float:
    if y == 1:
        return distance * distance
    gap = max(0.0, margin - distance)
    return gap * gap


def make_pairs(
    labels: list[str], rng: np.random.Generator, pairs_per_anchor: int = 1
) -> list[TrainPair]:
    """Sample one positive and one negative partner per anchor (per repeat).

    Anchors whose class has no second member are skipped entirely to keep
    positives and negatives balanced 1:1.
    """
    classes: dict[str, list[int]] = {}
    for i, lab in enumerate(labels):
        classes.setdefault(lab, []).append(i)
    if len(classes) < 2:
        raise ConfigurationError("pair generation needs at least two classes")
    by_class = {lab: np.array(idx) for lab, idx in classes.items()}
    others = {
        lab: np.array([i for l2, idx in classes.items() if l2 != lab for i in idx])
        for lab in classes
    }
    pairs: list[TrainPair] = []
    for _ in range(pairs_per_anchor):
        for i, lab in enumerate(labels):
            same = by_class[lab]
            if same.size < 2:
                continue
            pos = i
            while pos == i:
                pos = int(same[rng.integers(same.size)])
            neg = int(others[lab][rng.integers(others[lab].size)])
            pairs.append(TrainPair(i, pos, 1))
            pairs.append(TrainPair(i, neg, 0))
    return pairs


def pair_loss_and_grads(
    params: nn.MlpParams,
    features: np.ndarray,
    pairs: list[TrainPair],
    margin: float,
) -> tuple[float, list, list]:
    """Mean contrastive loss over the pair batch and its parameter gradients."""
    ia = np.array([p.ia for p in pairs])
    ib = np.array([p.ib for p in pairs])
    y = np.array([p.y for p in pairs], dtype=np.float64)

    ea, cache_a = nn.forward(params, features[ia])
    eb, cache_b = nn.forward(params, features[ib])
    diff = ea - eb
    dsq = np.sum(diff * diff, axis=1)
    d = np.sqrt(dsq)

    gap = np.maximum(0.0, margin - d)
    losses = y * dsq + (1.0 - y) * gap * gap
    loss = float(losses.mean())

    # dL/d(ea) per pair; the y=0 branch needs diff/d, guarded at d == 0.
    n = len(pairs)
    coef_pos = 2.0 * y
    safe_d = np.where(d > 1e-12, d, 1.0)
    coef_neg = np.where(d > 1e-12, -2.0 * (1.0 - y) * gap / safe_d, 0.0)
    delta_a = ((coef_pos + coef_neg)[:, None] * diff) / n

    gw_a, gb_a = nn.backward(params, cache_a, delta_a)
    gw_b, gb_b = nn.backward(params, cache_b, -delta_a)
    grads_w = [a + b for a, b in zip(gw_a, gw_b)]
    grads_b = [a + b for a, b in zip(gb_a, gb_b)]
    return loss, grads_w, grads_b


def train_snn(
    features: np.ndarray,
    activity_labels: list[str],
    config: SnnTrainConfig,
) -> tuple[nn.MlpParams, list[float]]:
    """Train the embedding network; returns final params and per-epoch mean loss.

    Deterministic for a fixed seed: initialization, per-epoch pair sampling
    and batch shuffling all come from one seeded generator.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != len(activity_labels):
        raise ShapeError("features must be (n_samples, dim) matching the labels")
    if len(set(activity_labels)) < 2:
        raise ConfigurationError("training needs at least two activity classes")

    rng = np.random.default_rng(config.seed)
    params = init_embedder(features.shape[1], rng)
    state = nn.AdamState.for_params(params)
    history: list[float] = []

    for epoch in range(config.epochs):
        pairs = make_pairs(activity_labels, rng, config.pairs_per_anchor)
        epoch_loss = 0.0
        seen = 0
        for batch_idx in nn.iter_batches(len(pairs), config.batch_size, rng):
            batch = [pairs[i] for i in batch_idx]
            loss, gw, gb = pair_loss_and_grads(params, features, batch, config.margin)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            nn.adam_step(params, gw, gb, state, config.learning_rate)
            epoch_loss += loss * len(batch)
            seen += len(batch)
        history.append(epoch_loss / max(seen, 1))
    return params, history


@dataclass
class TrainedEmbedder:
    """Embedding network bundled with the feature pipeline it was trained on."""

    params: nn.MlpParams
    pipeline: FeaturePipeline
    margin: float = 1.0

    @property
    def variant(self) -> FeatureVariant:
        return self.pipeline.variants[0]

    def embed_windows(self, windows) -> np.ndarray:
        if not windows:
            return np.empty((0, EMBEDDING_DIM), dtype=np.float64)
        return embed(self.params, self.pipeline.transform(windows))


def train_embedder_on_windows(
    windows,
    config: SnnTrainConfig,
    variant: FeatureVariant = FeatureVariant.SIMILARITY,
    cache: dict | None = None,
) -> tuple[TrainedEmbedder, list[float]]:
    """Fit the feature pipeline on labeled windows and train the embedder.

    Activity tags are the pair labels; fall windows use their activity tag
    (or the label value when untagged).
    """
    pipeline = FeaturePipeline([variant], cache=cache).fit(windows)
    labels = [w.activity or w.label.value for w in windows]
    params, history = train_snn(pipeline.transform(windows), labels, config)
    return TrainedEmbedder(params=params, pipeline=pipeline, margin=config.margin), history
