"""Gradient scoring of windows, per-cluster quotas and budgeted selection.

The score of a window is the mean absolute consecutive difference of its
signal (a signal-dynamics measure, not a training gradient), averaged over
the three axes. Selection takes ``round(fraction * pool)`` samples total,
split evenly across clusters: a base quota of floor(fraction*|X|/|C|) per
cluster, the rounding remainder granted to the largest clusters first,
over-quota clusters contributing their top-quota windows by descending
score and any leftover budget refilled from the global remainder. DBSCAN
noise is pooled as one pseudo-cluster so outliers stay selectable.

Rounding uses Python's round (half to even).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import AccelWindow, Dataset, FeedbackSample, Provenance
from .errors import ConfigurationError, MergeError


def window_gradient(window: AccelWindow) -> float:
    """Mean |x[i+1] - x[i]| per axis, averaged over the three axes."""
    if window.n < 2:
        raise ConfigurationError(f"gradient needs at least 2 samples, got {window.n}")
    return float(np.mean(np.abs(np.diff(window.xyz, axis=0))))


def budget(pool_size: int, fraction: float) -> int:
    """Total selection budget B = round(fraction * |X|), capped at |X|."""
    if fraction < 0:
        raise ConfigurationError(f"fraction must be >= 0, got {fraction}")
    return min(round(fraction * pool_size), pool_size)


def base_quota(pool_size: int, cluster_count: int, fraction: float) -> int:
    """Per-cluster base quota floor(fraction * |X| / |C|)."""
    if cluster_count < 1:
        return 0
    return int(math.floor(fraction * pool_size / cluster_count + 1e-9))


def cluster_quotas(cluster_sizes: Mapping[int, int], fraction: float) -> dict[int, int]:
    """Quota per cluster: base for everyone, remainder to the largest first.

    Remainder ties between equal-size clusters go to the smaller cluster id.
    """
    if not cluster_sizes:
        return {}
    pool = sum(cluster_sizes.values())
    total = budget(pool, fraction)
    base = base_quota(pool, len(cluster_sizes), fraction)
    quotas = {cid: base for cid in cluster_sizes}
    remainder = total - base * len(cluster_sizes)
    order = sorted(cluster_sizes, key=lambda cid: (-cluster_sizes[cid], cid))
    i = 0
    while remainder > 0:
        quotas[order[i % len(order)]] += 1
        remainder -= 1
        i += 1
    return quotas


@dataclass(frozen=True)
class ScoredSample:
    uid: str
    cluster_id: int
    g: float


@dataclass
class SelectionResult:
    selected: tuple[str, ...]       # uids, sorted
    quotas: dict[int, int]
    fraction: float
    budget: int

    def __contains__(self, uid: str) -> bool:
        return uid in set(self.selected)


def select(scored: Sequence[ScoredSample], fraction: float) -> SelectionResult:
    """Deterministic budgeted top-score selection under per-cluster quotas."""
    if not scored:
        return SelectionResult(selected=(), quotas={}, fraction=fraction, budget=0)
    uids = [s.uid for s in scored]
    if len(set(uids)) != len(uids):
        raise ConfigurationError("duplicate sample ids in selection pool")

    by_cluster: dict[int, list[ScoredSample]] = {}
    for s in scored:
        by_cluster.setdefault(s.cluster_id, []).append(s)
    quotas = cluster_quotas({cid: len(v) for cid, v in by_cluster.items()}, fraction)
    total = budget(len(scored), fraction)

    chosen: list[ScoredSample] = []
    for cid in sorted(by_cluster):
        ranked = sorted(by_cluster[cid], key=lambda s: (-s.g, s.uid))
        chosen.extend(ranked[: quotas[cid]])

    leftover = total - len(chosen)
    if leftover > 0:
        taken = {s.uid for s in chosen}
        rest = sorted(
            (s for s in scored if s.uid not in taken), key=lambda s: (-s.g, s.uid)
        )
        chosen.extend(rest[:leftover])

    return SelectionResult(
        selected=tuple(sorted(s.uid for s in chosen)),
        quotas=quotas,
        fraction=fraction,
        budget=total,
    )


def score_feedback(
    feedback: Sequence[FeedbackSample], cluster_labels: Sequence[int]
) -> list[ScoredSample]:
    if len(feedback) != len(cluster_labels):
        raise ConfigurationError("feedback and cluster label counts differ")
    return [
        ScoredSample(uid=s.uid, cluster_id=int(c), g=window_gradient(s.window))
        for s, c in zip(feedback, cluster_labels)
    ]


def select_feedback(
    feedback: Sequence[FeedbackSample],
    cluster_labels: Sequence[int],
    fraction: float,
) -> tuple[SelectionResult, list[FeedbackSample]]:
    """Score, select and return the chosen feedback samples in pool order."""
    scored = score_feedback(feedback, cluster_labels)
    result = select(scored, fraction)
    keep = set(result.selected)
    return result, [s for s in feedback if s.uid in keep]


def merge(original: Dataset, selected_feedback: Sequence[FeedbackSample]) -> Dataset:
    """Union of the original dataset and the selected feedback windows.

    Feedback windows keep their oracle-consistent labels (TP -> fall,
    FP -> adl, guaranteed by the FeedbackSample invariant).
    """
    extra: list[AccelWindow] = [s.window for s in selected_feedback]
    base_uids = original.uids()
    for w in extra:
        if w.uid in base_uids:
            raise MergeError(f"window identity {w.uid!r} already present in the original dataset")
    return Dataset(windows=tuple(original.windows) + tuple(extra), provenance=Provenance.MERGED)
