"""Band x window grid search per subject and cohort aggregation."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .evaluation import DEFAULT_FOLDS, DEFAULT_SEED, CvSummary, cross_validate_combination
from .preprocess import (
    BandSpec,
    TimeWindow,
    apply_zero_phase,
    concatenate_epochs,
    design_bandpass,
    extract_epochs,
)

__all__ = [
    "SLIDING_BANDS",
    "LITERATURE_BANDS",
    "GridCell",
    "GridTable",
    "PopulationGrid",
    "SubjectDataError",
    "build_band_grid",
    "build_window_grid",
    "run_subject_grid",
    "aggregate_population",
    "best_combination_per_subject",
]

logger = logging.getLogger(__name__)

# 4 Hz wide, 2 Hz step, 4-40 Hz
SLIDING_BANDS = tuple((lo, lo + 4) for lo in range(4, 37, 2))
LITERATURE_BANDS = ((4, 12), (8, 13), (8, 30), (14, 30), (14, 40), (4, 40))
WINDOWS = ((0, 2.25), (0, 4), (0.5, 2.5), (0.5, 3.5), (1, 3.5))


class SubjectDataError(ValueError):
    """A subject's recordings cannot be used for the grid."""


def build_band_grid() -> list[BandSpec]:
    """The 17 sliding bands followed by the 6 literature bands."""
    return [BandSpec(lo, hi) for lo, hi in SLIDING_BANDS + LITERATURE_BANDS]


def build_window_grid() -> list[TimeWindow]:
    return [TimeWindow(a, b) for a, b in WINDOWS]


@dataclass(frozen=True)
class GridCell:
    band: BandSpec
    window: TimeWindow
    summary: CvSummary


@dataclass(frozen=True)
class GridTable:
    """Cross-validated scores of one subject, ``cells[band_index][window_index]``."""

    subject_id: int
    bands: tuple[BandSpec, ...]
    windows: tuple[TimeWindow, ...]
    cells: tuple[tuple[GridCell, ...], ...]

    def __post_init__(self):
        if len(self.cells) != len(self.bands) or any(
            len(row) != len(self.windows) for row in self.cells
        ):
            raise ValueError("cell array does not match the grid shape")
        for b, row in enumerate(self.cells):
            for w, cell in enumerate(row):
                if (cell.band, cell.window) != (self.bands[b], self.windows[w]):
                    raise ValueError(f"cell [{b}][{w}] is out of place")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.bands), len(self.windows)

    def __iter__(self):
        for row in self.cells:
            yield from row

    def __len__(self):
        return len(self.bands) * len(self.windows)

    def matrix(self, metric: str = "accuracy_mean") -> np.ndarray:
        """Band x window array of one CvSummary field."""
        return np.array([[getattr(c.summary, metric) for c in row] for row in self.cells])


@dataclass(frozen=True)
class PopulationGrid:
    """Per-cell cohort means; NaN subject cells are left out of that cell."""

    bands: tuple[BandSpec, ...]
    windows: tuple[TimeWindow, ...]
    accuracy: np.ndarray
    kappa: np.ndarray
    n_subjects: np.ndarray
    accuracy_sd: np.ndarray
    kappa_sd: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.accuracy.shape

    def best_cell(self) -> tuple[BandSpec, TimeWindow]:
        b, w = np.unravel_index(np.nanargmax(self.accuracy), self.accuracy.shape)
        return self.bands[b], self.windows[w]


def run_subject_grid(
    recordings: Sequence,
    subject_id: int = 0,
    k: int = DEFAULT_FOLDS,
    seed: int = DEFAULT_SEED,
    bands: Sequence[BandSpec] | None = None,
    windows: Sequence[TimeWindow] | None = None,
    label_map: Mapping[str, int] | None = None,
) -> GridTable:
    """Cross-validate every (band, window) combination for one subject.

    Each run is filtered once per band; for each window the epochs of all runs
    are pooled before cross-validation.

    Raises
    ------
    SubjectDataError
        When no run yields usable cue events or the pooled trials lack a class.
    """
    bands = tuple(build_band_grid() if bands is None else bands)
    windows = tuple(build_window_grid() if windows is None else windows)
    if not recordings:
        raise SubjectDataError(f"subject {subject_id}: no recordings")

    rows = []
    for band in bands:
        filtered = []
        for rec in recordings:
            filt = design_bandpass(band, rec.sampling_rate)
            filtered.append(apply_zero_phase(rec, filt))
        row = []
        for window in windows:
            sets = []
            for rec in filtered:
                try:
                    sets.append(extract_epochs(rec, window, label_map, band=band))
                except ValueError:
                    continue
            if not sets:
                raise SubjectDataError(f"subject {subject_id}: no usable cue events")
            epochs = concatenate_epochs(sets)
            if len(np.unique(epochs.labels)) < 2:
                raise SubjectDataError(f"subject {subject_id}: only one class present")
            summary = cross_validate_combination(epochs, k=k, seed=seed)
            row.append(GridCell(band, window, summary))
        rows.append(tuple(row))
        logger.debug("subject %s band %s done", subject_id, band)
    return GridTable(subject_id, bands, windows, tuple(rows))


def aggregate_population(tables: Sequence[GridTable]) -> PopulationGrid:
    """Per-cell mean over subjects of accuracy and kappa."""
    if not tables:
        raise ValueError("no subject tables to aggregate")
    bands, windows = tables[0].bands, tables[0].windows
    for t in tables[1:]:
        if t.bands != bands or t.windows != windows:
            raise ValueError(f"subject {t.subject_id} uses a different grid")
    acc = np.stack([t.matrix("accuracy_mean") for t in tables])
    kap = np.stack([t.matrix("kappa_mean") for t in tables])
    counts = np.sum(~np.isnan(acc), axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        acc_mean = np.nansum(acc, axis=0) / counts
        kap_mean = np.nansum(kap, axis=0) / counts
        acc_sd = _nan_sd(acc)
        kap_sd = _nan_sd(kap)
    return PopulationGrid(bands, windows, acc_mean, kap_mean, counts, acc_sd, kap_sd)


def _nan_sd(values):
    counts = np.sum(~np.isnan(values), axis=0)
    mean = np.nansum(values, axis=0) / counts
    sq = np.nansum((values - mean) ** 2, axis=0)
    return np.where(counts > 1, np.sqrt(sq / np.maximum(counts - 1, 1)), 0.0)


def best_combination_per_subject(table: GridTable) -> GridCell:
    """Highest-accuracy cell; ties go to higher kappa, lower f_lo, earlier t_start.

    Remaining ties keep the first cell in canonical grid order.
    """
    best, best_key = None, None
    for cell in table:
        s = cell.summary
        key = (s.accuracy_mean, s.kappa_mean, -cell.band.f_lo, -cell.window.t_start)
        if np.isnan(s.accuracy_mean):
            continue
        if best_key is None or key > best_key:
            best, best_key = cell, key
    if best is None:
        raise ValueError(f"subject {table.subject_id} has no scored cells")
    return best
