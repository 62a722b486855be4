"""Density-based clustering of embedding vectors and cluster-quality scoring.

DBSCAN conventions used here (fixed so results are reproducible and exactly
checkable): a core point has at least ``min_pts`` points within ``eps``
counting itself; clusters are the connected components of core points under
the eps-neighborhood relation; a non-core point within eps of a core point
is a border point and joins the first cluster that claims it under an
ascending-index scan (equivalently, the claiming cluster whose lowest-index
core point is smallest); everything else is noise (-1).
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import FeedbackSample
from .errors import ConfigurationError, ShapeError

NOISE = -1
_UNSEEN = -2


@dataclass
class DbscanConfig:
    eps: float | None = None  # None -> auto from the k-distance heuristic
    min_pts: int = 5

    def __post_init__(self):
        if self.eps is not None and self.eps <= 0:
            raise ConfigurationError(f"eps must be > 0, got {self.eps}")
        if self.min_pts < 2:
            raise ConfigurationError(f"min_pts must be >= 2, got {self.min_pts}")


@dataclass
class DbscanResult:
    labels: np.ndarray      # cluster id per point, NOISE for noise
    core_mask: np.ndarray   # True where the point is a core point
    eps: float
    min_pts: int

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max(initial=NOISE) + 1)

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster_id)


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    sq = np.sum(points * points, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def auto_eps(points: np.ndarray, min_pts: int = 5) -> float:
    """Median of the (min_pts-1)-th nearest-neighbor distances, floored at 1e-9."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError(f"points must be 2-d, got shape {points.shape}")
    if points.shape[0] < min_pts:
        raise ConfigurationError(
            f"auto eps needs at least min_pts={min_pts} points, got {points.shape[0]}"
        )
    dist = _pairwise_distances(points)
    kth = np.sort(dist, axis=1)[:, min_pts - 1]  # column 0 is the self-distance
    return max(float(np.median(kth)), 1e-9)


def dbscan(points: np.ndarray, config: DbscanConfig) -> DbscanResult:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ShapeError(f"points must be (n >= 1, dim), got shape {points.shape}")
    n = points.shape[0]
    eps = config.eps if config.eps is not None else auto_eps(points, config.min_pts)

    dist = _pairwise_distances(points)
    within = dist <= eps
    neighbor_counts = within.sum(axis=1)  # includes self
    core = neighbor_counts >= config.min_pts
    neighbors = [np.flatnonzero(within[i]) for i in range(n)]

    labels = np.full(n, _UNSEEN, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != _UNSEEN or not core[i]:
            continue
        labels[i] = cluster
        queue = deque(neighbors[i])
        while queue:
            j = queue.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster  # border point, claimed by this cluster
            if labels[j] != _UNSEEN:
                continue
            labels[j] = cluster
            if core[j]:
                queue.extend(neighbors[j])
        cluster += 1
    labels[labels == _UNSEEN] = NOISE
    return DbscanResult(labels=labels, core_mask=core, eps=float(eps), min_pts=config.min_pts)


def cluster_feedback(
    embedder, feedback: list[FeedbackSample], config: DbscanConfig
) -> tuple[DbscanResult | None, dict[int, list[FeedbackSample]]]:
    """Embed feedback windows and group them by DBSCAN cluster.

    Returns the raw result plus cluster id -> members (noise under NOISE).
    Empty feedback yields (None, {}).
    """
    if not feedback:
        return None, {}
    embeddings = embedder.embed_windows([s.window for s in feedback])
    result = dbscan(embeddings, config)
    by_cluster: dict[int, list[FeedbackSample]] = {}
    for sample, label in zip(feedback, result.labels):
        by_cluster.setdefault(int(label), []).append(sample)
    return result, by_cluster


@dataclass
class PurityReport:
    purity: float
    per_activity: dict[str, float]
    n_scored: int
    all_noise: bool = False


def cluster_purity(labels: np.ndarray, true_labels: list[str]) -> PurityReport:
    """Majority-label accuracy over non-noise points, with per-activity breakdown.

    Each cluster votes its most common true label; purity is the fraction of
    non-noise points sitting in a cluster whose majority label matches their
    own. All-noise input is degenerate and reports 0 with a warning.
    """
    labels = np.asarray(labels)
    if labels.shape[0] != len(true_labels):
        raise ShapeError("labels and true_labels length mismatch")
    scored = labels != NOISE
    n_scored = int(scored.sum())
    if n_scored == 0:
        warnings.warn("purity undefined: every point is noise", stacklevel=2)
        return PurityReport(purity=0.0, per_activity={}, n_scored=0, all_noise=True)

    majority: dict[int, str] = {}
    for cid in np.unique(labels[scored]):
        members = [true_labels[i] for i in np.flatnonzero(labels == cid)]
        counts: dict[str, int] = {}
        for lab in members:
            counts[lab] = counts.get(lab, 0) + 1
        majority[int(cid)] = max(sorted(counts), key=lambda k: counts[k])

    correct_total = 0
    per_activity_counts: dict[str, list[int]] = {}
    for i in np.flatnonzero(scored):
        lab = true_labels[i]
        hit = int(majority[int(labels[i])] == lab)
        correct_total += hit
        stats = per_activity_counts.setdefault(lab, [0, 0])
        stats[0] += hit
        stats[1] += 1
    per_activity = {
        lab: hit / total for lab, (hit, total) in sorted(per_activity_counts.items())
    }
    return PurityReport(
        purity=correct_total / n_scored, per_activity=per_activity, n_scored=n_scored
    )
