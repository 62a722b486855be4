"""Similarity metrics between accelerometer axes and window feature vectors.

Three metric families feed the embedding network: cosine similarity, Pearson
correlation and dynamic time warping, each computed between the three axis
pairs (x,y), (x,z), (y,z) of a window. Alternative inputs (per-axis basic
statistics, raw flattened series) are kept for ablation runs.

Degenerate-input convention: a zero-norm vector (cosine) or zero-variance
sequence (Pearson) yields similarity 0.0 rather than an error; constant
windows legitimately occur in idle activity data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .core import AccelWindow
from .errors import ConfigurationError, SchemaError, StateError


class FeatureVariant(str, Enum):
    SIMILARITY = "similarity"
    BASIC_STATS = "stats"
    RAW = "raw"


_AXIS_PAIRS = ((0, 1), (0, 2), (1, 2))
_PAIR_TAGS = ("xy", "xz", "yz")


def cosine(a: Sequence[float], b: Sequence[float], return_degenerate: bool = False):
    """Cosine similarity (a.b)/(|a||b|), clipped to [-1, 1].

    Either vector having zero norm gives 0.0 (degenerate). With
    ``return_degenerate`` the result is a ``(value, degenerate)`` pair.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ConfigurationError("cosine needs two equal-length vectors of size >= 1")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return (0.0, True) if return_degenerate else 0.0
    value = float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))
    return (value, False) if return_degenerate else value


def plcc(a: Sequence[float], b: Sequence[float], return_degenerate: bool = False):
    """Pearson's linear correlation coefficient, clipped to [-1, 1].

    A constant sequence (zero variance) gives 0.0 (degenerate).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ConfigurationError("plcc needs two equal-length vectors of size >= 2")
    da = a - a.mean()
    db = b - b.mean()
    sa = np.sqrt(np.sum(da * da))
    sb = np.sqrt(np.sum(db * db))
    if sa == 0.0 or sb == 0.0:
        return (0.0, True) if return_degenerate else 0.0
    value = float(np.clip(np.sum(da * db) / (sa * sb), -1.0, 1.0))
    return (value, False) if return_degenerate else value


@njit(cache=True)
def _dtw_kernel(a: np.ndarray, b: np.ndarray) -> float:
    n = a.shape[0]
    m = b.shape[0]
    prev = np.empty(m, dtype=np.float64)
    cur = np.empty(m, dtype=np.float64)
    prev[0] = abs(a[0] - b[0])
    for j in range(1, m):
        prev[j] = prev[j - 1] + abs(a[0] - b[j])
    for i in range(1, n):
        cur[0] = prev[0] + abs(a[i] - b[0])
        for j in range(1, m):
            best = prev[j]
            if prev[j - 1] < best:
                best = prev[j - 1]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = abs(a[i] - b[j]) + best
        prev, cur = cur, prev
    return prev[m - 1]


def dtw(a: Sequence[float], b: Sequence[float]) -> float:
    """Dynamic time warping distance with absolute-difference ground metric.

    Classic O(|a||b|) dynamic program over monotone alignments; the cost of
    the cheapest warping path from (0, 0) to (|a|-1, |b|-1).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size == 0 or b.size == 0:
        raise ConfigurationError("dtw needs two non-empty 1-d sequences")
    return float(_dtw_kernel(a, b))


def dtw_normalized(a: Sequence[float], b: Sequence[float]) -> float:
    """DTW divided by the summed sequence lengths, commensurate with bounded metrics."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return dtw(a, b) / (a.size + b.size)


def similarity_features(window: AccelWindow) -> np.ndarray:
    """The 9-vector [cos_xy, cos_xz, cos_yz, plcc_xy, .., dtw_n_xy, ..]."""
    axes = [window.axis(i) for i in range(3)]
    cos_part = [cosine(axes[i], axes[j]) for i, j in _AXIS_PAIRS]
    plcc_part = [plcc(axes[i], axes[j]) for i, j in _AXIS_PAIRS]
    dtw_part = [dtw_normalized(axes[i], axes[j]) for i, j in _AXIS_PAIRS]
    return np.array(cos_part + plcc_part + dtw_part, dtype=np.float64)


def basic_stats_features(window: AccelWindow) -> np.ndarray:
    """Per-axis (min, max, mean, std), x then y then z: 12 values."""
    parts = []
    for i in range(3):
        v = window.axis(i)
        parts += [v.min(), v.max(), v.mean(), v.std()]
    return np.array(parts, dtype=np.float64)


def raw_features(window: AccelWindow) -> np.ndarray:
    """Flattened raw series: all x samples, then y, then z (3n values)."""
    return window.xyz.T.reshape(-1).copy()


_EXTRACTORS = {
    FeatureVariant.SIMILARITY: similarity_features,
    FeatureVariant.BASIC_STATS: basic_stats_features,
    FeatureVariant.RAW: raw_features,
}


def extract_features(window: AccelWindow, variant: FeatureVariant) -> np.ndarray:
    """Raw (pre-normalization) feature vector for one window."""
    return _EXTRACTORS[FeatureVariant(variant)](window)


def feature_dim(variant: FeatureVariant, window_size: int) -> int:
    variant = FeatureVariant(variant)
    if variant == FeatureVariant.SIMILARITY:
        return 9
    if variant == FeatureVariant.BASIC_STATS:
        return 12
    return 3 * window_size


def feature_names(variant: FeatureVariant, window_size: int) -> list[str]:
    variant = FeatureVariant(variant)
    if variant == FeatureVariant.SIMILARITY:
        return (
            [f"cos_{t}" for t in _PAIR_TAGS]
            + [f"plcc_{t}" for t in _PAIR_TAGS]
            + [f"dtw_n_{t}" for t in _PAIR_TAGS]
        )
    if variant == FeatureVariant.BASIC_STATS:
        return [f"{ax}_{s}" for ax in ("x", "y", "z") for s in ("min", "max", "mean", "std")]
    return [f"{ax}_{i}" for ax in ("x", "y", "z") for i in range(window_size)]


@dataclass
class FeatureScaler:
    """Z-score normalization fitted on a training pool.

    Features with near-zero training variance (< 1e-12 std) pass through
    unscaled to avoid blowing up on new data.
    """

    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @property
    def fitted(self) -> bool:
        return self.mean is not None

    def fit(self, matrix: np.ndarray) -> "FeatureScaler":
        matrix = np.asarray(matrix, dtype=np.float64)
        self.mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        self.std = np.where(std > 1e-12, std, 1.0)
        return self

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise StateError("scaler used before fitting on a training pool")
        return (np.asarray(matrix, dtype=np.float64) - self.mean) / self.std

    def to_json(self) -> dict:
        if not self.fitted:
            raise StateError("cannot persist an unfitted scaler")
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_json(cls, rec: dict) -> "FeatureScaler":
        return cls(
            mean=np.asarray(rec["mean"], dtype=np.float64),
            std=np.asarray(rec["std"], dtype=np.float64),
        )


class FeaturePipeline:
    """Extracts (and optionally caches) feature vectors, then z-scores them.

    ``variants`` are concatenated in order; the scaler must be fitted on a
    training pool before ``transform`` is used. The raw-feature cache is
    keyed by (window content digest, variant) and may be shared between
    pipelines to avoid recomputing DTW for windows seen elsewhere in a run.
    """

    def __init__(
        self,
        variants: Sequence[FeatureVariant],
        scaler: FeatureScaler | None = None,
        cache: dict | None = None,
    ):
        if not variants:
            raise ConfigurationError("pipeline needs at least one feature variant")
        self.variants = tuple(FeatureVariant(v) for v in variants)
        self.scaler = scaler or FeatureScaler()
        self.cache = cache if cache is not None else {}

    @property
    def fitted(self) -> bool:
        return self.scaler.fitted

    def raw_vector(self, window: AccelWindow) -> np.ndarray:
        parts = []
        for variant in self.variants:
            key = (window.digest, variant)
            vec = self.cache.get(key)
            if vec is None:
                vec = extract_features(window, variant)
                self.cache[key] = vec
            parts.append(vec)
        return np.concatenate(parts)

    def raw_matrix(self, windows: Iterable[AccelWindow]) -> np.ndarray:
        rows = [self.raw_vector(w) for w in windows]
        if not rows:
            return np.empty((0, 0), dtype=np.float64)
        return np.vstack(rows)

    def fit(self, windows: Sequence[AccelWindow]) -> "FeaturePipeline":
        if not windows:
            raise ConfigurationError("cannot fit feature scaler on an empty pool")
        self.scaler.fit(self.raw_matrix(windows))
        return self

    def transform(self, windows: Sequence[AccelWindow]) -> np.ndarray:
        if not self.fitted:
            raise StateError("feature normalization requested before fitting")
        if not windows:
            return np.empty((0, self.scaler.mean.size), dtype=np.float64)
        return self.scaler.transform(self.raw_matrix(windows))

    def dim(self, window_size: int) -> int:
        return sum(feature_dim(v, window_size) for v in self.variants)

    def to_json(self) -> dict:
        return {
            "variants": [v.value for v in self.variants],
            "scaler": self.scaler.to_json() if self.fitted else None,
        }

    @classmethod
    def from_json(cls, rec: dict, cache: dict | None = None) -> "FeaturePipeline":
        scaler = FeatureScaler.from_json(rec["scaler"]) if rec.get("scaler") else FeatureScaler()
        return cls([FeatureVariant(v) for v in rec["variants"]], scaler=scaler, cache=cache)


def save_feature_matrix(
    matrix: np.ndarray, names: Sequence[str], uids: Sequence[str], path: str | Path
) -> None:
    """Persist a feature matrix as CSV with a sample_id column."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(",".join(["sample_id"] + list(names)) + "\n")
        for uid, row in zip(uids, matrix):
            fh.write(",".join([uid] + [repr(float(v)) for v in row]) + "\n")


def save_scaler(scaler: FeatureScaler, path: str | Path) -> None:
    rec = {"format": "fallsift-scaler/1"}
    rec.update(scaler.to_json())
    Path(path).write_text(json.dumps(rec, indent=1) + "\n")


def load_scaler(path: str | Path) -> FeatureScaler:
    rec = json.loads(Path(path).read_text())
    if rec.get("format") != "fallsift-scaler/1":
        raise SchemaError(f"{path}: not a fallsift scaler record")
    return FeatureScaler.from_json(rec)
