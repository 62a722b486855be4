"""Fall classifier and the three personalization retraining strategies.

A small feedforward network over engineered window features (default:
similarity metrics plus per-axis basic statistics, 21 inputs) with layers
in -> 32 ReLU -> 16 ReLU -> 1, sigmoid output, trained with binary
cross-entropy (fall = 1). Retraining strategies:

  * from-scratch: fresh initialization on the merged dataset;
  * transfer: first hidden layer frozen bit-exactly, the rest fine-tuned
    on the merged dataset;
  * few-shot: first hidden layer frozen, upper layers fine-tuned on at
    most ``shots_per_class`` highest-gradient feedback windows per class.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .core import AccelWindow, Dataset, FeedbackSample, Label, Verdict
from .errors import ConfigurationError, ShapeError, TrainingDivergedError
from .features import FeaturePipeline, FeatureVariant
from .selection import window_gradient

HIDDEN_SIZES = (32, 16)
DEFAULT_VARIANTS = (FeatureVariant.SIMILARITY, FeatureVariant.BASIC_STATS)


@dataclass
class DetectorTrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 0.001
    seed: int = 0
    threshold: float = 0.5
    class_weighting: bool = True
    variants: tuple[FeatureVariant, ...] = DEFAULT_VARIANTS

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ConfigurationError("epochs >= 0, batch_size >= 1 and learning_rate > 0 required")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError(f"threshold must be in [0, 1], got {self.threshold}")
        self.variants = tuple(FeatureVariant(v) for v in self.variants)


@dataclass
class DetectorModel:
    params: nn.MlpParams
    pipeline: FeaturePipeline
    threshold: float = 0.5

    def copy(self) -> "DetectorModel":
        return DetectorModel(
            params=self.params.copy(), pipeline=self.pipeline, threshold=self.threshold
        )


def init_detector(input_dim: int, rng: np.random.Generator) -> nn.MlpParams:
    return nn.init_mlp((input_dim,) + HIDDEN_SIZES + (1,), rng)


def predict_proba(model: DetectorModel, windows: list[AccelWindow]) -> np.ndarray:
    if not windows:
        return np.empty(0, dtype=np.float64)
    logits, _ = nn.forward(model.params, model.pipeline.transform(windows))
    return nn.sigmoid(logits[:, 0])


def predict(model: DetectorModel, window: AccelWindow) -> tuple[float, bool]:
    """Fall probability and the alert decision (probability >= threshold)."""
    p = float(predict_proba(model, [window])[0])
    return p, p >= model.threshold


def predict_batch(model: DetectorModel, windows: list[AccelWindow]) -> tuple[np.ndarray, np.ndarray]:
    probs = predict_proba(model, windows)
    return probs, probs >= model.threshold


def class_weights(targets: np.ndarray, enabled: bool) -> np.ndarray:
    """Inverse-frequency per-sample weights (mean weight 1), or all ones."""
    n = targets.size
    if not enabled:
        return np.ones(n, dtype=np.float64)
    n_pos = float(targets.sum())
    n_neg = float(n - n_pos)
    if n_pos == 0 or n_neg == 0:
        return np.ones(n, dtype=np.float64)
    return np.where(targets > 0.5, n / (2.0 * n_pos), n / (2.0 * n_neg))


def bce_loss_and_grads(
    params: nn.MlpParams, x: np.ndarray, targets: np.ndarray, weights: np.ndarray
) -> tuple[float, list, list]:
    """Weighted binary cross-entropy from logits; mean over the batch."""
    logits, cache = nn.forward(params, x)
    z = logits[:, 0]
    # softplus(z) - z*t, computed stably
    losses = np.maximum(z, 0.0) - z * targets + np.log1p(np.exp(-np.abs(z)))
    loss = float(np.mean(weights * losses))
    delta = (weights * (nn.sigmoid(z) - targets) / z.size)[:, None]
    grads_w, grads_b = nn.backward(params, cache, delta)
    return loss, grads_w, grads_b


def _fit(
    params: nn.MlpParams,
    x: np.ndarray,
    targets: np.ndarray,
    config: DetectorTrainConfig,
    frozen_layers: frozenset[int] = frozenset(),
) -> list[float]:
    """Adam training loop in place; returns the per-epoch mean loss."""
    weights = class_weights(targets, config.class_weighting)
    rng = np.random.default_rng(config.seed)
    state = nn.AdamState.for_params(params)
    history: list[float] = []
    n = x.shape[0]
    for epoch in range(config.epochs):
        epoch_loss = 0.0
        for batch in nn.iter_batches(n, config.batch_size, rng):
            loss, gw, gb = bce_loss_and_grads(params, x[batch], targets[batch], weights[batch])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            nn.adam_step(params, gw, gb, state, config.learning_rate, frozen_layers=frozen_layers)
            epoch_loss += loss * batch.size
        history.append(epoch_loss / n)
    return history


def _training_arrays(pipeline: FeaturePipeline, windows: list[AccelWindow]) -> tuple[np.ndarray, np.ndarray]:
    x = pipeline.transform(windows)
    targets = np.array([1.0 if w.label == Label.FALL else 0.0 for w in windows])
    return x, targets


def _require_both_classes(windows: list[AccelWindow]) -> None:
    labels = {w.label for w in windows}
    if labels != {Label.FALL, Label.ADL}:
        raise ConfigurationError(
            "detector training needs both fall and adl windows, got only "
            + ", ".join(sorted(l.value for l in labels))
        )


def train_tfs(merged: Dataset, config: DetectorTrainConfig, cache: dict | None = None) -> DetectorModel:
    """Retrain from scratch: fresh init and a freshly fitted feature scaler."""
    windows = list(merged.windows)
    _require_both_classes(windows)
    pipeline = FeaturePipeline(config.variants, cache=cache).fit(windows)
    rng = np.random.default_rng(config.seed)
    params = init_detector(pipeline.dim(windows[0].n), rng)
    x, targets = _training_arrays(pipeline, windows)
    _fit(params, x, targets, config)
    return DetectorModel(params=params, pipeline=pipeline, threshold=config.threshold)


def train_tl(base: DetectorModel, merged: Dataset, config: DetectorTrainConfig) -> DetectorModel:
    """Fine-tune the base model with its first hidden layer frozen."""
    windows = list(merged.windows)
    _require_both_classes(windows)
    model = base.copy()
    x, targets = _training_arrays(model.pipeline, windows)
    _fit(model.params, x, targets, config, frozen_layers=frozenset({0}))
    return model


def train_fsl(
    base: DetectorModel,
    selected_feedback: list[FeedbackSample],
    config: DetectorTrainConfig,
    shots_per_class: int = 10,
    fallback: Dataset | None = None,
) -> DetectorModel:
    """Few-shot fine-tune on the highest-gradient selected feedback windows.

    At most ``shots_per_class`` windows per class; a class absent from the
    feedback falls back to the highest-gradient base-dataset windows of that
    class (with a warning). ``shots_per_class`` = 0 returns the base model
    unchanged.
    """
    if shots_per_class < 0:
        raise ConfigurationError(f"shots_per_class must be >= 0, got {shots_per_class}")
    if shots_per_class == 0:
        return base.copy()

    def top_shots(windows: list[AccelWindow]) -> list[AccelWindow]:
        ranked = sorted(windows, key=lambda w: (-window_gradient(w), w.uid))
        return ranked[:shots_per_class]

    shots: list[AccelWindow] = []
    for label, verdict in ((Label.FALL, Verdict.TP), (Label.ADL, Verdict.FP)):
        pool = [s.window for s in selected_feedback if s.verdict == verdict]
        if not pool:
            if fallback is None:
                raise ConfigurationError(
                    f"no {label.value} feedback and no fallback dataset provided"
                )
            warnings.warn(
                f"no {label.value} windows in feedback; borrowing from the base dataset",
                stacklevel=2,
            )
            pool = [w for w in fallback.windows if w.label == label]
            if not pool:
                raise ConfigurationError(f"fallback dataset has no {label.value} windows")
        shots.extend(top_shots(pool))

    model = base.copy()
    x, targets = _training_arrays(model.pipeline, shots)
    _fit(model.params, x, targets, config, frozen_layers=frozenset({0}))
    return model
