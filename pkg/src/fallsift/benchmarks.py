"""Canonical synthetic world used by the experiment defaults and the tests.

Eight activities of daily living plus falls. The roster is built so that the
personalization phenomena have something to bite on:

  * ``jacket`` produces a single synchronized burst on all three axes with
    gains jittered into the fall-gain box and an amplitude band overlapping
    the weak end of the fall range: in the detector's feature space its
    upper tail is genuinely ambiguous with weak falls, so a deployed model
    keeps raising false alarms on it, and naively accumulating that feedback
    crowds the fall boundary upward;
  * ``swing_sync`` and ``swing_anti`` are per-axis identical burst twins
    (same amplitude, frequency, noise and gain draws) that differ only in
    whether the x and y lobes coincide, so per-axis basic statistics cannot
    tell them apart while inter-axis similarity features can; neither occurs
    in the base corpus (user-specific activities);
  * the remaining activities (walking, sitting, drinking, brushing, pickup)
    give the clustering stage genuinely distinct groups.

Falls draw their spike amplitude from a triangular distribution whose thin
lower tail reaches into the jacket band, so a fraction of falls is weak and
at risk when the boundary shifts. Amplitude cores of falls and jacket stay
far apart, which keeps their embedding clusters separable (the sparse
overlap ends up as DBSCAN noise rather than a bridge).
"""

from __future__ import annotations

import zlib

import numpy as np

from .core import Source
from .simulate import ActivityProfile, StreamSpec

FALL_SPIKE_RANGE = (4.5, 20.0)
FALL_SPIKE_MODE = 14.0
FALL_AXIS_GAIN = (1.0, 0.82, 0.68)
FALL_GAIN_JITTER = 0.15
FALL_FREQ_RANGE = (0.9, 1.4)
FALL_NOISE_SD = 0.20


def default_profiles() -> tuple[ActivityProfile, ...]:
    return (
        ActivityProfile(
            name="sitting",
            waveforms=("constant", "constant", "constant"),
            amp_range=(0.1, 0.4),
            freq_range=(0.5, 1.0),
            noise_sd=0.06,
            baseline=(0.2, -0.1, 0.1),
        ),
        ActivityProfile(
            name="walking",
            waveforms=("sinusoid", "sinusoid", "sinusoid"),
            amp_range=(1.0, 2.0),
            freq_range=(1.6, 2.4),
            noise_sd=0.15,
            axis_gain=(1.0, 0.75, 0.55),
            phase=(0.0, 2.1, 4.2),
        ),
        ActivityProfile(
            name="drinking",
            waveforms=("ramp", "constant", "ramp"),
            amp_range=(0.8, 1.6),
            freq_range=(0.3, 0.6),
            noise_sd=0.10,
            axis_gain=(1.0, 0.3, 0.9),
        ),
        ActivityProfile(
            name="brushing",
            waveforms=("sinusoid", "constant", "constant"),
            amp_range=(0.8, 1.5),
            freq_range=(3.0, 4.5),
            noise_sd=0.12,
            baseline=(0.0, 0.3, -0.2),
        ),
        ActivityProfile(
            name="swing_sync",
            waveforms=("burst", "burst", "burst"),
            amp_range=(3.5, 8.5),
            amp_mode=5.2,
            freq_range=(1.2, 2.0),
            noise_sd=0.15,
            axis_gain=(1.0, 0.9, 0.5),
            burst_sync=(0, 0, 0),
        ),
        ActivityProfile(
            name="swing_anti",
            waveforms=("burst", "burst", "burst"),
            amp_range=(3.5, 8.5),
            amp_mode=5.2,
            freq_range=(1.2, 2.0),
            noise_sd=0.15,
            axis_gain=(1.0, 0.9, 0.5),
            burst_sync=(-1, 1, 1),
            burst_center=((0.12, 0.42), (0.58, 0.88), (0.58, 0.88)),
        ),
        ActivityProfile(
            name="jacket",
            waveforms=("burst", "burst", "burst"),
            amp_range=(4.0, 11.0),
            amp_mode=6.5,
            freq_range=(0.9, 1.4),
            noise_sd=0.20,
            axis_gain=(1.0, 0.82, 0.68),
            gain_jitter=0.15,
            burst_sync=(0, 0, 0),
            burst_center=((0.25, 0.75),) * 3,
        ),
        ActivityProfile(
            name="pickup",
            waveforms=("burst", "constant", "burst"),
            amp_range=(2.5, 5.5),
            amp_mode=3.5,
            freq_range=(0.6, 1.0),
            noise_sd=0.15,
            axis_gain=(1.0, 0.15, 0.85),
            burst_sync=(0, -1, 0),
        ),
    )


# Pre-deployment corpus: common household activities; the user-specific
# swing twins are absent and jacket/pickup are rare.
BASE_MIX = {
    "walking": 0.30,
    "sitting": 0.24,
    "drinking": 0.16,
    "brushing": 0.16,
    "jacket": 0.08,
    "pickup": 0.06,
}

# Per-user home stream: fall-like activities are everyday occurrences.
DEPLOY_MIX = {
    "walking": 0.24,
    "sitting": 0.12,
    "drinking": 0.04,
    "brushing": 0.04,
    "swing_sync": 0.14,
    "swing_anti": 0.14,
    "jacket": 0.20,
    "pickup": 0.08,
}

BALANCED_MIX = {p.name: 1.0 / 8.0 for p in default_profiles()}


def _spec(seed, rounds, windows, mix, fall_probability, subject, source) -> StreamSpec:
    return StreamSpec(
        seed=seed,
        rounds=rounds,
        windows_per_round=windows,
        profiles=default_profiles(),
        mix=dict(mix),
        fall_probability=fall_probability,
        fall_spike_range=FALL_SPIKE_RANGE,
        fall_spike_mode=FALL_SPIKE_MODE,
        fall_freq_range=FALL_FREQ_RANGE,
        fall_axis_gain=FALL_AXIS_GAIN,
        fall_gain_jitter=FALL_GAIN_JITTER,
        fall_noise_sd=FALL_NOISE_SD,
        subject_id=subject,
        source=source,
    )


def base_spec(seed: int, n_windows: int = 400) -> StreamSpec:
    """Pre-deployment training corpus: balanced falls vs ADLs, one round."""
    return _spec(seed, 1, n_windows, BASE_MIX, 0.5, f"base-{seed}", Source.BASE)


def deploy_spec(seed: int, rounds: int = 6, windows_per_round: int = 400) -> StreamSpec:
    """Per-user deployment stream: ADL-dominated, fall-like activities common."""
    return _spec(seed, rounds, windows_per_round, DEPLOY_MIX, 0.005, f"user-{seed}", Source.FEEDBACK)


def balanced_spec(seed: int, n_windows: int = 360, fall_probability: float = 0.2) -> StreamSpec:
    """Uniform activity mix; used by the clustering-quality benchmark."""
    return _spec(seed, 1, n_windows, BALANCED_MIX, fall_probability, f"bench-{seed}", Source.BASE)


def derive_seed(*parts) -> int:
    """Stable sub-seed derivation for independent random streams.

    Strings are hashed with crc32 (process-independent, unlike ``hash``),
    so derived seeds are reproducible across runs.
    """
    entropy = [
        zlib.crc32(p.encode()) if isinstance(p, str) else int(p) % (2**32) for p in parts
    ]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
