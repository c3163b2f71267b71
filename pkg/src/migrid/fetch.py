"""Download PhysioNet EEG Motor Movement/Imagery run files."""
from __future__ import annotations

import logging
import os
import tempfile
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .edf import EdfFormatError, parse_header

__all__ = ["DEFAULT_BASE_URL", "FetchReport", "run_path", "is_valid_edf", "fetch_dataset"]

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = (
    "https://physionet.org/files/eegmmidb/1.0.0/S{subject:03d}/S{subject:03d}R{run:02d}.edf"
)
MAX_CONCURRENT_DOWNLOADS = 4


@dataclass
class FetchReport:
    fetched: list[Path] = field(default_factory=list)
    skipped: list[Path] = field(default_factory=list)
    failed: list[tuple[Path, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed


def run_path(root, subject: int, run: int) -> Path:
    return Path(root) / f"S{subject:03d}" / f"S{subject:03d}R{run:02d}.edf"


def is_valid_edf(path) -> bool:
    """Header parses and the file length matches the declared record count."""
    try:
        raw = Path(path).read_bytes()
        header = parse_header(raw)
    except (OSError, EdfFormatError):
        return False
    if header.n_records < 0:
        return len(raw) > header.header_bytes
    return len(raw) >= header.header_bytes + header.n_records * header.record_bytes


def _download(url: str, dest: Path, timeout: float) -> None:
    with urllib.request.urlopen(url, timeout=timeout) as response:
        payload = response.read()
    fd, tmp = tempfile.mkstemp(dir=dest.parent, suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        if not is_valid_edf(tmp):
            raise EdfFormatError("downloaded file is not a valid EDF")
        os.replace(tmp, dest)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def fetch_dataset(
    subjects,
    runs,
    dest,
    base_url: str = DEFAULT_BASE_URL,
    timeout: float = 60.0,
) -> FetchReport:
    """Fetch ``S{sss}R{rr}.edf`` files into per-subject directories under ``dest``.

    Files already present and valid are skipped. Per-file HTTP failures are
    collected in the report; an unwritable ``dest`` raises ``OSError``.
    """
    dest = Path(dest)
    jobs = []
    report = FetchReport()
    for subject in subjects:
        for run in runs:
            path = run_path(dest, subject, run)
            path.parent.mkdir(parents=True, exist_ok=True)
            if not os.access(path.parent, os.W_OK):
                raise PermissionError(f"cannot write to {path.parent}")
            if path.exists() and is_valid_edf(path):
                report.skipped.append(path)
            else:
                jobs.append((base_url.format(subject=subject, run=run), path))

    def task(job):
        url, path = job
        try:
            _download(url, path, timeout)
        except (urllib.error.URLError, OSError, EdfFormatError, ValueError) as exc:
            logger.warning("failed to fetch %s: %s", url, exc)
            return path, str(exc)
        logger.info("fetched %s", path)
        return path, None

    with ThreadPoolExecutor(max_workers=MAX_CONCURRENT_DOWNLOADS) as pool:
        for path, error in pool.map(task, jobs):
            if error is None:
                report.fetched.append(path)
            else:
                report.failed.append((path, error))
    return report
