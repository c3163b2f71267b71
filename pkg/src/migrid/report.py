"""CSV and SVG emission of grid results."""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .evaluation import CvSummary
from .grid import (
    LITERATURE_BANDS,
    GridCell,
    GridTable,
    PopulationGrid,
    best_combination_per_subject,
)
from .preprocess import BandSpec, TimeWindow

__all__ = [
    "CSV_HEADER",
    "AGGREGATE_SUBJECT",
    "format_results_csv",
    "emit_results_csv",
    "emit_best_csv",
    "read_results_csv",
    "heatmap_svg",
    "emit_heatmap_svg",
]

CSV_HEADER = "subject,band_lo,band_hi,win_start,win_end,accuracy,acc_std,kappa,kappa_std"
AGGREGATE_SUBJECT = "all"


def _row(subject, band: BandSpec, window: TimeWindow, acc, acc_sd, kappa, kappa_sd) -> str:
    return ",".join(
        [
            str(subject),
            f"{band.f_lo:g}",
            f"{band.f_hi:g}",
            f"{window.t_start:g}",
            f"{window.t_end:g}",
            f"{acc:.6f}",
            f"{acc_sd:.6f}",
            f"{kappa:.6f}",
            f"{kappa_sd:.6f}",
        ]
    )


def _cell_row(subject, cell: GridCell) -> str:
    s = cell.summary
    return _row(subject, cell.band, cell.window, s.accuracy_mean, s.accuracy_std, s.kappa_mean, s.kappa_std)


def format_results_csv(results) -> str:
    """CSV text for subject tables or a population aggregate.

    Subject rows appear in ascending subject order, cells in canonical grid
    order. Aggregate rows use the subject field ``all`` and across-subject
    standard deviations.
    """
    lines = [CSV_HEADER]
    if isinstance(results, PopulationGrid):
        for b, band in enumerate(results.bands):
            for w, window in enumerate(results.windows):
                lines.append(
                    _row(
                        AGGREGATE_SUBJECT,
                        band,
                        window,
                        results.accuracy[b, w],
                        results.accuracy_sd[b, w],
                        results.kappa[b, w],
                        results.kappa_sd[b, w],
                    )
                )
    else:
        tables = sorted(results, key=lambda t: t.subject_id)
        if not tables:
            raise ValueError("no results to write")
        for table in tables:
            lines.extend(_cell_row(table.subject_id, cell) for cell in table)
    return "\n".join(lines) + "\n"


def _write(text: str, dest) -> Path:
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    with open(dest, "w", newline="\n", encoding="ascii") as fh:
        fh.write(text)
    return dest


def emit_results_csv(results, dest) -> Path:
    return _write(format_results_csv(results), dest)


def emit_best_csv(tables: Sequence[GridTable], dest) -> Path:
    """One row per subject with its best cell, ranked by accuracy then kappa."""
    if not tables:
        raise ValueError("no results to write")
    best = [(t.subject_id, best_combination_per_subject(t)) for t in tables]
    best.sort(key=lambda sc: (-sc[1].summary.accuracy_mean, -sc[1].summary.kappa_mean, sc[0]))
    lines = [CSV_HEADER] + [_cell_row(subject, cell) for subject, cell in best]
    return _write("\n".join(lines) + "\n", dest)


def read_results_csv(source) -> list[GridTable]:
    """Rebuild subject tables from an emitted CSV (aggregate rows are ignored).

    Summaries carry only the means and standard deviations; per-fold detail
    is not stored in the CSV.
    """
    text = Path(source).read_text(encoding="ascii") if not hasattr(source, "read") else source.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or ",".join(reader.fieldnames) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    cells = defaultdict(dict)
    bands, windows = {}, {}
    for row in reader:
        if row["subject"] == AGGREGATE_SUBJECT:
            continue
        band = BandSpec(float(row["band_lo"]), float(row["band_hi"]))
        window = TimeWindow(float(row["win_start"]), float(row["win_end"]))
        bands.setdefault(band, None)
        windows.setdefault(window, None)
        summary = CvSummary(
            accuracy_mean=float(row["accuracy"]),
            accuracy_std=float(row["acc_std"]),
            kappa_mean=float(row["kappa"]),
            kappa_std=float(row["kappa_std"]),
            n_folds=0,
            per_fold=(),
        )
        cells[int(row["subject"])][band, window] = GridCell(band, window, summary)
    band_order, window_order = tuple(bands), tuple(windows)
    tables = []
    for subject, by_key in cells.items():
        missing = [(b, w) for b in band_order for w in window_order if (b, w) not in by_key]
        if missing:
            raise ValueError(f"subject {subject} is missing {len(missing)} grid cells")
        rows = tuple(tuple(by_key[b, w] for w in window_order) for b in band_order)
        tables.append(GridTable(subject, band_order, window_order, rows))
    return sorted(tables, key=lambda t: t.subject_id)


# light yellow -> dark red
_LOW_RGB = (255, 247, 188)
_HIGH_RGB = (179, 0, 0)
_SLIDING_COLOUR = "#2e7d32"
_LITERATURE_COLOUR = "#c2185b"

_CELL_W, _CELL_H = 46, 34
_LEFT, _TOP = 96, 56


def _colour(t: float) -> str:
    rgb = [round(lo + (hi - lo) * t) for lo, hi in zip(_LOW_RGB, _HIGH_RGB)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def heatmap_svg(
    values,
    bands: Sequence[BandSpec],
    windows: Sequence[TimeWindow],
    title: str = "Mean accuracy",
) -> str:
    """SVG 1.1 heatmap with bands on the x axis and windows on the y axis.

    ``values`` has shape (n_bands, n_windows). Colours map linearly from the
    smallest to the largest cell; a constant field is drawn in the low colour.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (len(bands), len(windows)):
        raise ValueError(f"values shape {values.shape} does not match the grid")
    if not np.all(np.isfinite(values)):
        raise ValueError("aggregate is incomplete (NaN cells)")
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    literature = {BandSpec(a, b) for a, b in LITERATURE_BANDS}

    n_b, n_w = len(bands), len(windows)
    width = _LEFT + n_b * _CELL_W + 20
    height = _TOP + n_w * _CELL_H + 110
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2:g}" y="24" font-size="16" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{width / 2:g}" y="42" font-size="11" text-anchor="middle">'
        f"scale {lo:.3f} - {hi:.3f}</text>",
    ]
    for w, window in enumerate(windows):
        y = _TOP + w * _CELL_H
        out.append(
            f'<text x="{_LEFT - 8}" y="{y + _CELL_H / 2 + 4:g}" font-size="11" '
            f'text-anchor="end">{window.t_start:g}-{window.t_end:g} s</text>'
        )
        for b in range(n_b):
            v = values[b, w]
            t = (v - lo) / span if span > 0 else 0.0
            x = _LEFT + b * _CELL_W
            text_fill = "#ffffff" if t > 0.6 else "#000000"
            out.append(
                f'<rect x="{x}" y="{y}" width="{_CELL_W}" height="{_CELL_H}" '
                f'fill="{_colour(t)}" stroke="#ffffff" stroke-width="1"/>'
            )
            out.append(
                f'<text x="{x + _CELL_W / 2:g}" y="{y + _CELL_H / 2 + 4:g}" font-size="10" '
                f'text-anchor="middle" fill="{text_fill}">{v:.3f}</text>'
            )
    axis_y = _TOP + n_w * _CELL_H
    groups = {"sliding": [], "literature": []}
    for b, band in enumerate(bands):
        kind = "literature" if band in literature else "sliding"
        groups[kind].append(b)
        fill = _LITERATURE_COLOUR if kind == "literature" else _SLIDING_COLOUR
        cx = _LEFT + b * _CELL_W + _CELL_W / 2
        out.append(
            f'<text x="{cx:g}" y="{axis_y + 12}" font-size="10" fill="{fill}" '
            f'text-anchor="end" transform="rotate(-60 {cx:g} {axis_y + 12})">'
            f"{band.f_lo:g}-{band.f_hi:g}</text>"
        )
    for kind, label, fill in (
        ("sliding", "Sliding window bands (Hz)", _SLIDING_COLOUR),
        ("literature", "Literature bands (Hz)", _LITERATURE_COLOUR),
    ):
        idx = groups[kind]
        if not idx:
            continue
        x0 = _LEFT + min(idx) * _CELL_W
        x1 = _LEFT + (max(idx) + 1) * _CELL_W
        y = axis_y + 62
        out.append(
            f'<line x1="{x0 + 2}" y1="{y}" x2="{x1 - 2}" y2="{y}" stroke="{fill}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{(x0 + x1) / 2:g}" y="{y + 16}" font-size="12" fill="{fill}" '
            f'text-anchor="middle">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_heatmap_svg(aggregate: PopulationGrid, dest, metric: str = "accuracy") -> Path:
    values = getattr(aggregate, metric)
    title = f"Mean {metric} by frequency band and time window"
    return _write(heatmap_svg(values, aggregate.bands, aggregate.windows, title), dest)
