"""Seeded synthetic activity streams and a simulated feedback deployment.

Activities are parameterized waveform recipes (constant, sinusoid, burst,
ramp per axis) with per-window random amplitude, frequency and phase; fall
windows add a sharp high-amplitude spike on all axes. An oracle "user"
confirms every alert raised by a detector, so feedback pools contain exactly
the alerted windows, labeled TP (real fall) or FP (misclassified activity).

Generation is deterministic per (spec, seed): a single generator drives all
draws in window order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    SAMPLE_INTERVAL_MS,
    AccelWindow,
    Dataset,
    FeedbackSample,
    Label,
    Provenance,
    Source,
    Verdict,
)
from .errors import ConfigurationError

FALL_ACTIVITY = "fall"
WAVEFORMS = ("constant", "sinusoid", "burst", "ramp")


@dataclass(frozen=True)
class ActivityProfile:
    """Waveform recipe for one activity of daily living.

    Burst axes with the same non-negative ``burst_sync`` group id share one
    lobe (same center and width), which makes the axes correlated the way a
    genuine impact is; group -1 means each axis draws its own lobe position
    from its ``burst_center`` fraction range. ``amp_mode`` switches the
    amplitude draw from uniform to triangular (thin tails).
    """

    name: str
    waveforms: tuple[str, str, str]             # per-axis family
    amp_range: tuple[float, float]
    freq_range: tuple[float, float]             # Hz
    noise_sd: float
    axis_gain: tuple[float, float, float] = (1.0, 1.0, 1.0)
    phase: tuple[float, float, float] = (0.0, 0.0, 0.0)   # per-axis offset, radians
    baseline: tuple[float, float, float] = (0.0, 0.0, 0.0)
    amp_mode: float | None = None
    gain_jitter: float = 0.0
    burst_sync: tuple[int, int, int] = (-1, -1, -1)
    burst_center: tuple[tuple[float, float], ...] = ((0.15, 0.85),) * 3

    def __post_init__(self):
        for w in self.waveforms:
            if w not in WAVEFORMS:
                raise ConfigurationError(f"unknown waveform family {w!r}")
        if self.amp_range[0] > self.amp_range[1] or self.freq_range[0] > self.freq_range[1]:
            raise ConfigurationError(f"profile {self.name}: empty amplitude or frequency range")
        if self.freq_range[0] <= 0:
            raise ConfigurationError(f"profile {self.name}: frequencies must be positive")
        if self.noise_sd < 0:
            raise ConfigurationError(f"profile {self.name}: noise must be >= 0")
        if self.amp_mode is not None and not (
            self.amp_range[0] <= self.amp_mode <= self.amp_range[1]
        ):
            raise ConfigurationError(f"profile {self.name}: amp_mode outside amp_range")
        if not 0.0 <= self.gain_jitter < 1.0:
            raise ConfigurationError(f"profile {self.name}: gain_jitter must be in [0, 1)")


@dataclass
class StreamSpec:
    """What one simulated deployment produces: rounds of labeled windows."""

    seed: int
    rounds: int
    windows_per_round: int
    profiles: tuple[ActivityProfile, ...]
    mix: dict[str, float]                       # activity name -> probability
    fall_probability: float
    fall_spike_range: tuple[float, float] = (9.0, 22.0)
    fall_spike_mode: float | None = None        # triangular amplitude if set
    fall_freq_range: tuple[float, float] = (0.9, 1.4)  # lobe width = 1/(2f) seconds
    fall_center: tuple[float, float] = (0.25, 0.75)
    fall_axis_gain: tuple[float, float, float] = (1.0, 0.85, 0.7)
    fall_gain_jitter: float = 0.0
    fall_noise_sd: float = 0.25
    window_size: int = 128
    subject_id: str = "user"
    source: Source = Source.FEEDBACK

    def __post_init__(self):
        if self.rounds < 1 or self.windows_per_round < 1:
            raise ConfigurationError("rounds and windows_per_round must be >= 1")
        if not 0.0 <= self.fall_probability <= 1.0:
            raise ConfigurationError(f"fall probability must be in [0, 1], got {self.fall_probability}")
        total = sum(self.mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"activity mix must sum to 1, got {total}")
        names = {p.name for p in self.profiles}
        missing = set(self.mix) - names
        if missing:
            raise ConfigurationError(f"mix references unknown activities: {sorted(missing)}")

    def profile(self, name: str) -> ActivityProfile:
        for p in self.profiles:
            if p.name == name:
                return p
        raise KeyError(name)


def _lobe(t: np.ndarray, center: float, width: float) -> np.ndarray:
    """Half-sine lobe of the given width (seconds) centered at ``center``."""
    local = (t - (center - width / 2.0)) / width
    return np.where((local >= 0) & (local <= 1), np.sin(np.pi * np.clip(local, 0, 1)), 0.0)


def _draw_amp(lo: float, hi: float, mode: float | None, rng: np.random.Generator) -> float:
    if mode is None or lo == hi:
        return float(rng.uniform(lo, hi))
    return float(rng.triangular(lo, mode, hi))


def _adl_window(profile: ActivityProfile, n: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) * (SAMPLE_INTERVAL_MS / 1000.0)
    span = t[-1] if t[-1] > 0 else 1.0
    amp = _draw_amp(*profile.amp_range, profile.amp_mode, rng)
    freq = rng.uniform(*profile.freq_range)
    global_phase = rng.uniform(0.0, 2.0 * np.pi)
    width = 1.0 / (2.0 * freq)

    # one lobe plan per burst-sync group, in ascending group order
    burst_plans: dict[int, float] = {}
    for axis in range(3):
        if profile.waveforms[axis] != "burst":
            continue
        group = profile.burst_sync[axis]
        key = axis if group < 0 else -group - 1
        if key not in burst_plans:
            lo, hi = profile.burst_center[axis]
            burst_plans[key] = rng.uniform(lo, hi) * span

    xyz = np.empty((n, 3), dtype=np.float64)
    for axis in range(3):
        gain = profile.axis_gain[axis]
        if profile.gain_jitter > 0:
            gain *= rng.uniform(1.0 - profile.gain_jitter, 1.0 + profile.gain_jitter)
        a = amp * gain
        family = profile.waveforms[axis]
        if family == "constant":
            sig = np.full_like(t, a)
        elif family == "sinusoid":
            sig = a * np.sin(2.0 * np.pi * freq * t + global_phase + profile.phase[axis])
        elif family == "ramp":
            sign = 1.0 if rng.random() < 0.5 else -1.0
            sig = sign * a * (t / span)
        else:  # burst
            group = profile.burst_sync[axis]
            key = axis if group < 0 else -group - 1
            sig = a * _lobe(t, burst_plans[key], width)
        noise = rng.normal(0.0, profile.noise_sd, size=n)
        xyz[:, axis] = profile.baseline[axis] + sig + noise
    return xyz


def _fall_window(spec: StreamSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.window_size
    t = np.arange(n) * (SAMPLE_INTERVAL_MS / 1000.0)
    spike_amp = _draw_amp(*spec.fall_spike_range, spec.fall_spike_mode, rng)
    center = rng.uniform(*spec.fall_center) * t[-1]
    width = 1.0 / (2.0 * rng.uniform(*spec.fall_freq_range))
    lobe = _lobe(t, center, width)
    xyz = np.empty((n, 3), dtype=np.float64)
    for axis in range(3):
        gain = spec.fall_axis_gain[axis]
        if spec.fall_gain_jitter > 0:
            gain *= rng.uniform(1.0 - spec.fall_gain_jitter, 1.0 + spec.fall_gain_jitter)
        noise = rng.normal(0.0, spec.fall_noise_sd, size=n)
        xyz[:, axis] = spike_amp * gain * lobe + noise
    return xyz


def generate_stream(spec: StreamSpec) -> list[list[AccelWindow]]:
    """Rounds of labeled windows, deterministic for a fixed spec."""
    rng = np.random.default_rng(spec.seed)
    names = sorted(spec.mix)
    probs = np.array([spec.mix[a] for a in names])
    window_ms = spec.window_size * SAMPLE_INTERVAL_MS
    rounds: list[list[AccelWindow]] = []
    index = 0
    for _ in range(spec.rounds):
        windows: list[AccelWindow] = []
        for _ in range(spec.windows_per_round):
            is_fall = rng.random() < spec.fall_probability
            if is_fall:
                xyz = _fall_window(spec, rng)
                label, activity = Label.FALL, FALL_ACTIVITY
            else:
                activity = names[int(rng.choice(len(names), p=probs))]
                xyz = _adl_window(spec.profile(activity), spec.window_size, rng)
                label = Label.ADL
            windows.append(
                AccelWindow(
                    xyz=xyz,
                    t0_ms=index * window_ms,
                    subject_id=spec.subject_id,
                    label=label,
                    activity=activity,
                    source=spec.source,
                )
            )
            index += 1
        rounds.append(windows)
    return rounds


def generate_dataset(spec: StreamSpec, provenance: Provenance = Provenance.ORIGINAL) -> Dataset:
    """All rounds flattened into one dataset (used for base training data)."""
    windows = [w for rnd in generate_stream(spec) for w in rnd]
    return Dataset(windows=tuple(windows), provenance=provenance)


def simulate_deployment(detector, rounds: list[list[AccelWindow]], first_round: int = 1) -> list[list[FeedbackSample]]:
    """Run the detector over each round; alerted windows become feedback.

    The oracle user is perfect: a flagged window whose true label is fall is
    confirmed TP, anything else FP. Non-alerted windows are discarded.
    """
    from .detector import predict_batch

    out: list[list[FeedbackSample]] = []
    for offset, windows in enumerate(rounds):
        round_no = first_round + offset
        collected: list[FeedbackSample] = []
        if windows:
            _, alerts = predict_batch(detector, windows)
            for window, alerted in zip(windows, alerts):
                if alerted:
                    verdict = Verdict.TP if window.label == Label.FALL else Verdict.FP
                    collected.append(FeedbackSample(window=window, verdict=verdict, round=round_no))
        out.append(collected)
    return out
