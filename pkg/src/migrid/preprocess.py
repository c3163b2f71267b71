"""Band-pass filtering of continuous recordings and cue-locked epoching."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import signal

from .edf import Recording

__all__ = [
    "BandSpec",
    "TimeWindow",
    "FilterSpec",
    "EpochSet",
    "DEFAULT_LABEL_MAP",
    "transition_widths",
    "design_bandpass",
    "apply_zero_phase",
    "extract_epochs",
    "concatenate_epochs",
]

logger = logging.getLogger(__name__)

# left fist imagery -> 0, right fist imagery -> 1, rest (T0) dropped
DEFAULT_LABEL_MAP = {"T1": 0, "T2": 1}

# Hamming window main-lobe factor: length = 3.3 * fs / transition width
_HAMMING_FACTOR = 3.3


@dataclass(frozen=True, order=True)
class BandSpec:
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not 0 < self.f_lo < self.f_hi:
            raise ValueError(f"invalid band ({self.f_lo}, {self.f_hi})")

    def check_rate(self, fs: float) -> None:
        if not self.f_hi < fs / 2:
            raise ValueError(f"band {self} reaches Nyquist at fs={fs}")

    def __str__(self):
        return f"({self.f_lo:g}, {self.f_hi:g})"


@dataclass(frozen=True, order=True)
class TimeWindow:
    t_start: float
    t_end: float

    def __post_init__(self):
        if not 0 <= self.t_start < self.t_end:
            raise ValueError(f"invalid window ({self.t_start}, {self.t_end})")

    def n_samples(self, fs: float) -> int:
        return round(self.t_end * fs) - round(self.t_start * fs)

    def __str__(self):
        return f"({self.t_start:g}, {self.t_end:g})"


@dataclass(frozen=True)
class FilterSpec:
    taps: np.ndarray
    band: BandSpec
    fs: float
    l_trans: float
    h_trans: float

    @property
    def numtaps(self) -> int:
        return len(self.taps)

    @property
    def delay(self) -> int:
        return (len(self.taps) - 1) // 2

    def frequency_response(self, freqs):
        """Complex response at ``freqs`` (Hz)."""
        _, h = signal.freqz(self.taps, worN=np.atleast_1d(freqs), fs=self.fs)
        return h


def transition_widths(band: BandSpec, fs: float) -> tuple[float, float]:
    """Lower and upper transition bandwidths in Hz."""
    l_trans = min(max(0.25 * band.f_lo, 2.0), band.f_lo)
    h_trans = min(max(0.25 * band.f_hi, 2.0), fs / 2 - band.f_hi)
    return l_trans, h_trans


def design_bandpass(band: BandSpec, fs: float) -> FilterSpec:
    """Linear-phase windowed-sinc (Hamming) band-pass FIR.

    The cutoffs sit half a transition width outside the band edges so that
    ``[f_lo, f_hi]`` is inside the passband and everything more than one
    transition width away is in the stopband.

    Raises
    ------
    ValueError
        If the band is invalid for ``fs`` or there is less than half the
        nominal transition width between ``f_hi`` and Nyquist.
    """
    band.check_rate(fs)
    l_trans, h_trans = transition_widths(band, fs)
    nominal_h = max(0.25 * band.f_hi, 2.0)
    if h_trans < 0.5 * nominal_h:
        raise ValueError(
            f"band {band} too close to Nyquist ({fs / 2:g} Hz): upper transition "
            f"{h_trans:g} Hz, need at least {0.5 * nominal_h:g} Hz"
        )
    numtaps = math.ceil(_HAMMING_FACTOR * fs / min(l_trans, h_trans))
    numtaps += 1 - numtaps % 2
    taps = signal.firwin(
        numtaps,
        [band.f_lo - l_trans / 2, band.f_hi + h_trans / 2],
        window="hamming",
        pass_zero=False,
        fs=fs,
    )
    return FilterSpec(taps=taps, band=band, fs=fs, l_trans=l_trans, h_trans=h_trans)


def apply_zero_phase(recording: Recording, filt: FilterSpec) -> Recording:
    """Filter every channel with the group delay removed.

    The first and last ``filt.delay`` samples of the output see zero padding
    and should not be used for analysis.
    """
    if filt.fs != recording.sampling_rate:
        raise ValueError(
            f"filter designed for {filt.fs} Hz, recording is {recording.sampling_rate} Hz"
        )
    if recording.n_samples <= filt.numtaps:
        raise ValueError(
            f"recording of {recording.n_samples} samples is shorter than the "
            f"{filt.numtaps}-tap filter"
        )
    # odd-length taps + mode="same" centres the kernel: zero net delay
    out = signal.oaconvolve(recording.data, filt.taps[np.newaxis, :], mode="same", axes=1)
    return replace(recording, data=out)


@dataclass(frozen=True)
class EpochSet:
    """Cue-locked trials, shape (n_trials, n_channels, n_samples)."""

    data: np.ndarray
    labels: np.ndarray
    window: TimeWindow
    sampling_rate: float
    band: BandSpec | None = None
    n_skipped: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if data.ndim != 3:
            raise ValueError(f"epoch data must be 3-D, got shape {data.shape}")
        if labels.shape != (data.shape[0],):
            raise ValueError(f"{labels.shape[0]} labels for {data.shape[0]} trials")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    def __len__(self):
        return self.n_trials


def extract_epochs(
    recording: Recording,
    window: TimeWindow,
    label_map: Mapping[str, int] | None = None,
    band: BandSpec | None = None,
) -> EpochSet:
    """Cut one epoch per mapped cue event.

    Epoch samples are ``[c + round(t_start*fs), c + round(t_end*fs))`` with
    ``c = round(onset*fs)``. Events whose epoch would run past the end of the
    recording are skipped and counted in ``EpochSet.n_skipped``.
    """
    label_map = DEFAULT_LABEL_MAP if label_map is None else label_map
    fs = recording.sampling_rate
    first, last = round(window.t_start * fs), round(window.t_end * fs)
    epochs, labels, skipped = [], [], 0
    for ev in recording.events:
        if ev.label not in label_map:
            continue
        cue = round(ev.onset * fs)
        if cue + last > recording.n_samples:
            skipped += 1
            continue
        epochs.append(recording.data[:, cue + first : cue + last])
        labels.append(label_map[ev.label])
    if skipped:
        logger.warning("skipped %d event(s) running past the end of the recording", skipped)
    if not epochs:
        raise ValueError(
            f"no usable events for labels {sorted(label_map)} in window {window}"
        )
    return EpochSet(
        data=np.stack(epochs),
        labels=np.array(labels),
        window=window,
        sampling_rate=fs,
        band=band,
        n_skipped=skipped,
    )


def concatenate_epochs(sets: Sequence[EpochSet]) -> EpochSet:
    """Pool trials from several runs recorded with identical settings."""
    if not sets:
        raise ValueError("nothing to concatenate")
    head = sets[0]
    for other in sets[1:]:
        if (other.window, other.sampling_rate, other.band) != (
            head.window,
            head.sampling_rate,
            head.band,
        ):
            raise ValueError("epoch sets differ in window, band or sampling rate")
    return EpochSet(
        data=np.concatenate([s.data for s in sets]),
        labels=np.concatenate([s.labels for s in sets]),
        window=head.window,
        sampling_rate=head.sampling_rate,
        band=head.band,
        n_skipped=sum(s.n_skipped for s in sets),
    )
