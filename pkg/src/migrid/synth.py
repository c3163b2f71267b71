"""Synthetic two-class motor-imagery recordings with a planted effect.

Every channel carries broadband white noise plus a band-limited background
component in the effect band. On trials of label ``L`` the channels in
``effect_channels[L]`` receive an extra, independent band-limited burst
confined to the effect window, whose power is ``effect_strength`` times the
background band power. A fixed near-identity mixing matrix spreads sources
across neighbouring channels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .edf import AnnotationEvent, Recording
from .preprocess import BandSpec, TimeWindow

__all__ = ["SynthSpec", "band_limited_noise", "generate_synthetic_subject"]

# cue timing of the motor imagery runs: 4.1 s of imagery, 4.2 s of rest
TASK_DURATION = 4.1
REST_DURATION = 4.2


def _default_channels():
    return ((0, 1, 2, 3), (4, 5, 6, 7))


@dataclass(frozen=True)
class SynthSpec:
    n_channels: int = 16
    fs: float = 160.0
    n_trials_per_label: int = 45
    effect_band: BandSpec = BandSpec(10, 14)
    effect_window: TimeWindow = TimeWindow(0.5, 2.5)
    effect_channels: tuple[tuple[int, ...], tuple[int, ...]] = field(
        default_factory=_default_channels
    )
    effect_strength: float = 3.0
    noise_level: float = 10.0
    seed: int = 0
    n_runs: int = 3
    mixing: float = 0.3

    def validate(self) -> None:
        if self.n_channels < 2:
            raise ValueError("need at least 2 channels")
        if not self.fs > 0:
            raise ValueError("fs must be positive")
        self.effect_band.check_rate(self.fs)
        if self.effect_window.t_end > TASK_DURATION + REST_DURATION:
            raise ValueError("effect window extends past the trial")
        if self.effect_strength < 0:
            raise ValueError("effect_strength must be >= 0")
        if self.noise_level <= 0:
            raise ValueError("noise_level must be positive")
        if self.n_trials_per_label < 1 or self.n_runs < 1:
            raise ValueError("need at least one trial per label and one run")
        if len(self.effect_channels) != 2:
            raise ValueError("effect_channels needs one channel set per label")
        left, right = (set(c) for c in self.effect_channels)
        if left & right:
            raise ValueError("effect channel sets must be disjoint")
        if any(not 0 <= c < self.n_channels for c in left | right):
            raise ValueError("effect channel index out of range")


def band_limited_noise(rng, n_rows: int, n_samples: int, band: BandSpec, fs: float):
    """Unit-variance noise whose DFT is zero outside ``band``."""
    spectrum = np.fft.rfft(rng.standard_normal((n_rows, n_samples)), axis=-1)
    freqs = np.fft.rfftfreq(n_samples, 1.0 / fs)
    spectrum[:, (freqs < band.f_lo) | (freqs > band.f_hi)] = 0
    out = np.fft.irfft(spectrum, n=n_samples, axis=-1)
    sd = out.std(axis=-1, keepdims=True)
    return out / np.where(sd > 0, sd, 1.0)


def _run_labels(rng, spec: SynthSpec) -> list[np.ndarray]:
    per_run = np.array_split(np.arange(2 * spec.n_trials_per_label), spec.n_runs)
    labels = np.repeat([0, 1], spec.n_trials_per_label)
    labels = rng.permutation(labels)
    return [labels[idx] for idx in per_run]


def generate_synthetic_subject(spec: SynthSpec) -> list[Recording]:
    """One recording per run, cues annotated ``T1`` (label 0) / ``T2`` (label 1).

    Each run starts with a rest period annotated ``T0``; every cue is followed
    by imagery then rest. Deterministic given ``spec.seed``.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    fs = spec.fs
    n_ch = spec.n_channels
    mix = np.eye(n_ch) + spec.mixing * rng.standard_normal((n_ch, n_ch)) / np.sqrt(n_ch)
    names = tuple(f"C{i + 1:02d}" for i in range(n_ch))
    burst_start = round(spec.effect_window.t_start * fs)
    burst_len = spec.effect_window.n_samples(fs)
    burst_sd = spec.noise_level * np.sqrt(spec.effect_strength)

    recordings = []
    for labels in _run_labels(rng, spec):
        onsets = REST_DURATION + np.arange(len(labels)) * (TASK_DURATION + REST_DURATION)
        n_samples = round((onsets[-1] + TASK_DURATION + REST_DURATION) * fs)
        sources = spec.noise_level * rng.standard_normal((n_ch, n_samples))
        sources += spec.noise_level * band_limited_noise(
            rng, n_ch, n_samples, spec.effect_band, fs
        )
        events = [AnnotationEvent(0.0, REST_DURATION, "T0")]
        for onset, label in zip(onsets, labels):
            events.append(AnnotationEvent(float(onset), TASK_DURATION, f"T{label + 1}"))
            events.append(
                AnnotationEvent(float(onset + TASK_DURATION), REST_DURATION, "T0")
            )
            channels = list(spec.effect_channels[label])
            burst = band_limited_noise(rng, len(channels), burst_len, spec.effect_band, fs)
            if spec.effect_strength > 0:
                start = round(onset * fs) + burst_start
                sources[channels, start : start + burst_len] += burst_sd * burst
        recordings.append(
            Recording(
                channel_labels=names,
                sampling_rate=fs,
                data=mix @ sources,
                events=tuple(events),
            )
        )
    return recordings
