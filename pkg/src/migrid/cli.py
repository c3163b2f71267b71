"""``migrid`` command line: fetch, synth, run, aggregate, stats, report."""
from __future__ import annotations

import argparse
import itertools
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .edf import EdfFormatError, read_edf, write_edf
from .evaluation import DEFAULT_FOLDS, DEFAULT_SEED
from .fetch import DEFAULT_BASE_URL, fetch_dataset, run_path
from .grid import SubjectDataError, aggregate_population, run_subject_grid
from .preprocess import BandSpec, TimeWindow
from .report import (
    emit_best_csv,
    emit_heatmap_svg,
    emit_results_csv,
    read_results_csv,
)
from .stats import bonferroni_alpha, marginal_contrast, rm_anova_two_way
from .synth import SynthSpec, generate_synthetic_subject

logger = logging.getLogger("migrid")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PARTIAL_FETCH = 4

ENV_DATA_DIR = "MIGRID_DATA_DIR"
RESULTS_CSV = "results.csv"


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    data_dir: Path
    subjects: list[int]
    runs: list[int]
    k_folds: int = DEFAULT_FOLDS
    seed: int = DEFAULT_SEED
    output_dir: Path = Path("results")
    parallelism: int = 1
    base_url: str = DEFAULT_BASE_URL

    def __post_init__(self):
        if self.k_folds < 2:
            raise ConfigError("folds must be at least 2")
        if not self.subjects:
            raise ConfigError("no subjects selected")
        if not self.runs:
            raise ConfigError("no runs selected")
        if self.parallelism < 1:
            raise ConfigError("jobs must be at least 1")


def parse_int_list(text: str) -> list[int]:
    """Parse ``"1-3,7,9-10"`` into ``[1, 2, 3, 7, 9, 10]``."""
    values = []
    try:
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                lo, hi = (int(p) for p in part.split("-", 1))
                if hi < lo:
                    raise ConfigError(f"empty range {part!r}")
                values.extend(range(lo, hi + 1))
            else:
                values.append(int(part))
    except ValueError:
        raise ConfigError(f"cannot parse integer list {text!r}") from None
    return sorted(dict.fromkeys(values))


def _parse_pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"expected two comma-separated numbers, got {text!r}") from None
    return a, b


def read_config_file(path) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{n}: expected key=value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_CONFIG_KEYS = {
    "data_dir": "data_dir",
    "subjects": "subjects",
    "runs": "runs",
    "folds": "folds",
    "seed": "seed",
    "out": "out",
    "output_dir": "out",
    "jobs": "jobs",
    "base_url": "base_url",
}


def resolve_config(args) -> RunConfig:
    """Merge defaults < environment < config file < explicit flags."""
    merged = {
        "data_dir": os.environ.get(ENV_DATA_DIR, "data"),
        "subjects": "1-109",
        "runs": "4,8,12",
        "folds": str(DEFAULT_FOLDS),
        "seed": str(DEFAULT_SEED),
        "out": "results",
        "jobs": "1",
        "base_url": DEFAULT_BASE_URL,
    }
    if getattr(args, "config", None):
        for key, value in read_config_file(args.config).items():
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            merged[_CONFIG_KEYS[key]] = value
    for key in merged:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = str(value)
    try:
        return RunConfig(
            data_dir=Path(merged["data_dir"]),
            subjects=parse_int_list(merged["subjects"]),
            runs=parse_int_list(merged["runs"]),
            k_folds=int(merged["folds"]),
            seed=int(merged["seed"]),
            output_dir=Path(merged["out"]),
            parallelism=int(merged["jobs"]),
            base_url=merged["base_url"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _find_run(data_dir: Path, subject: int, run: int) -> Path | None:
    nested = run_path(data_dir, subject, run)
    flat = data_dir / nested.name
    for path in (nested, flat):
        if path.exists():
            return path
    return None


def cmd_fetch(cfg: RunConfig, args) -> int:
    try:
        report = fetch_dataset(cfg.subjects, cfg.runs, cfg.data_dir, cfg.base_url)
    except OSError as exc:
        raise ConfigError(f"destination not writable: {exc}") from None
    print(
        f"fetched {len(report.fetched)}, skipped {len(report.skipped)}, "
        f"failed {len(report.failed)}"
    )
    for path, error in report.failed:
        print(f"FAILED {path}: {error}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_PARTIAL_FETCH


def cmd_synth(cfg: RunConfig, args) -> int:
    band = BandSpec(*_parse_pair(args.effect_band))
    window = TimeWindow(*_parse_pair(args.effect_window))
    n_ch = args.channels
    half = max(1, n_ch // 4)
    channels = (tuple(range(half)), tuple(range(half, 2 * half)))
    for subject in cfg.subjects:
        spec = SynthSpec(
            n_channels=n_ch,
            n_trials_per_label=args.trials_per_label,
            effect_band=band,
            effect_window=window,
            effect_channels=channels,
            effect_strength=args.effect_strength,
            seed=cfg.seed + subject,
            n_runs=len(cfg.runs),
        )
        try:
            recordings = generate_synthetic_subject(spec)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for run, rec in zip(cfg.runs, recordings):
            path = run_path(cfg.data_dir, subject, run)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(write_edf(rec))
        print(f"subject {subject}: wrote {len(recordings)} run(s) to {path.parent}")
    return EXIT_OK


def _subject_grid(job):
    subject, paths, k, seed = job
    try:
        recordings = [read_edf(p) for p in paths]
        return subject, run_subject_grid(recordings, subject, k=k, seed=seed), None
    except (SubjectDataError, EdfFormatError, ValueError) as exc:
        return subject, None, str(exc)


def cmd_run(cfg: RunConfig, args) -> int:
    jobs, skipped = [], []
    for subject in cfg.subjects:
        paths = [_find_run(cfg.data_dir, subject, r) for r in cfg.runs]
        if any(p is None for p in paths):
            skipped.append((subject, "missing run files"))
            continue
        jobs.append((subject, paths, cfg.k_folds, cfg.seed))

    if cfg.parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            outcomes = list(pool.map(_subject_grid, jobs))
    else:
        outcomes = [_subject_grid(job) for job in jobs]

    tables = []
    for subject, table, error in outcomes:
        if table is None:
            skipped.append((subject, error))
        else:
            tables.append(table)
            logger.info("subject %d done", subject)
    skipped.sort()
    for subject, reason in skipped:
        print(f"skipped subject {subject}: {reason}", file=sys.stderr)
    if not tables:
        raise DataError("no subject produced results")
    dest = emit_results_csv(tables, cfg.output_dir / RESULTS_CSV)
    print(f"wrote {dest} ({len(tables)} subject(s), {len(skipped)} skipped)")
    return EXIT_OK


def _load_results(cfg: RunConfig, args):
    path = Path(args.results) if args.results else cfg.output_dir / RESULTS_CSV
    try:
        tables = read_results_csv(path)
    except FileNotFoundError:
        raise DataError(f"results file {path} not found") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if not tables:
        raise DataError(f"{path} holds no subject results")
    return tables


def cmd_aggregate(cfg: RunConfig, args) -> int:
    tables = _load_results(cfg, args)
    aggregate = aggregate_population(tables)
    dest = emit_results_csv(aggregate, cfg.output_dir / "aggregate.csv")
    band, window = aggregate.best_cell()
    print(f"wrote {dest}; best mean accuracy at band {band} Hz, window {window} s")
    return EXIT_OK


def cmd_stats(cfg: RunConfig, args) -> int:
    tables = _load_results(cfg, args)
    metric = f"{args.metric}_mean"
    cube = np.stack([t.matrix(metric) for t in tables])
    complete = ~np.isnan(cube).any(axis=(1, 2))
    cube = cube[complete]
    if len(cube) < 2:
        raise DataError("repeated-measures ANOVA needs at least 2 complete subjects")
    bands, windows = tables[0].bands, tables[0].windows
    table = rm_anova_two_way(cube)
    alpha = bonferroni_alpha(args.alpha, len(bands) * len(windows))

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    lines = ["effect,F,df_effect,df_error,p"]
    for e in table:
        lines.append(f"{e.name},{e.F:.6f},{e.df_effect},{e.df_error},{e.p:.6g}")
    (out / "anova.csv").write_text("\n".join(lines) + "\n")

    lines = ["factor,level_a,level_b,F,df1,df2,p,mean_a,sd_a,mean_b,sd_b,significant"]
    for axis, factor, levels in ((2, "window", windows), (1, "band", bands)):
        for i, j in itertools.combinations(range(len(levels)), 2):
            r = marginal_contrast(cube, axis, i, j, [str(v) for v in levels])
            lines.append(
                f'{factor},"{r.level_a}","{r.level_b}",{r.F:.6f},{r.df[0]},{r.df[1]},'
                f"{r.p:.6g},{r.mean_a:.6f},{r.sd_a:.6f},{r.mean_b:.6f},{r.sd_b:.6f},"
                f"{int(r.p < alpha)}"
            )
    (out / "pairwise.csv").write_text("\n".join(lines) + "\n")

    print(f"repeated-measures ANOVA on {args.metric}, {len(cube)} subjects")
    for e in table:
        print(f"  {e.name:12s} F({e.df_effect},{e.df_error}) = {e.F:.3f}  p = {e.p:.4g}")
    print(f"Bonferroni alpha = {args.alpha}/{len(bands) * len(windows)} = {alpha:.6g}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    tables = _load_results(cfg, args)
    aggregate = aggregate_population(tables)
    out = cfg.output_dir
    try:
        emit_heatmap_svg(aggregate, out / "heatmap.svg", "accuracy")
        emit_heatmap_svg(aggregate, out / "heatmap_kappa.svg", "kappa")
    except ValueError as exc:
        raise DataError(str(exc)) from None
    emit_best_csv(tables, out / "best.csv")
    print(f"wrote heatmap.svg, heatmap_kappa.svg and best.csv to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file overriding built-in defaults")
    common.add_argument("--data-dir", dest="data_dir", help=f"EDF directory (env {ENV_DATA_DIR})")
    common.add_argument("--subjects", help="subject list, e.g. 1-109 or 1,4,7-9")
    common.add_argument("--runs", help="run numbers (default 4,8,12)")
    common.add_argument("--folds", type=int, help="cross-validation folds (default 10)")
    common.add_argument("--seed", type=int, help="random seed (default 42)")
    common.add_argument("--out", help="output directory (default ./results)")
    common.add_argument("--jobs", type=int, help="worker processes for `run`")
    common.add_argument("--base-url", dest="base_url", help="download URL template")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="migrid",
        description="Band x time-window grid search for motor-imagery EEG (CSP + shrinkage LDA).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fetch", parents=[common], help="download PhysioNet run files")
    synth = sub.add_parser("synth", parents=[common], help="write synthetic subjects as EDF")
    synth.add_argument("--effect-strength", type=float, default=3.0)
    synth.add_argument("--effect-band", default="10,14")
    synth.add_argument("--effect-window", default="0.5,2.5")
    synth.add_argument("--channels", type=int, default=16)
    synth.add_argument("--trials-per-label", type=int, default=45)
    sub.add_parser("run", parents=[common], help="run the grid for each subject")
    for name, text in (
        ("aggregate", "cohort means per cell"),
        ("stats", "repeated-measures ANOVA and pairwise contrasts"),
        ("report", "SVG heatmaps and best-per-subject CSV"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--results", help=f"results CSV (default OUT/{RESULTS_CSV})")
        if name == "stats":
            p.add_argument("--metric", choices=("accuracy", "kappa"), default="accuracy")
            p.add_argument("--alpha", type=float, default=0.05)
    return parser


COMMANDS = {
    "fetch": cmd_fetch,
    "synth": cmd_synth,
    "run": cmd_run,
    "aggregate": cmd_aggregate,
    "stats": cmd_stats,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
