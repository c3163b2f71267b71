"""Reading and writing EDF / EDF+ files.

Only the parts of the format this toolkit needs are supported: continuous
16-bit recordings (EDF and EDF+C) with an optional ``EDF Annotations``
signal carrying time-stamped annotation lists (TALs).
"""
from __future__ import annotations

import datetime
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "EdfFormatError",
    "SignalHeader",
    "EdfHeader",
    "AnnotationEvent",
    "Recording",
    "parse_header",
    "parse_annotations",
    "read_recording",
    "read_edf",
    "write_edf",
]

ANNOTATION_LABEL = "EDF Annotations"

_MAIN_FIELDS = (
    ("version", 8),
    ("patient_id", 80),
    ("recording_id", 80),
    ("startdate", 8),
    ("starttime", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_records", 8),
    ("record_duration", 8),
    ("n_signals", 4),
)
_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("physical_dim", 8),
    ("phys_min", 8),
    ("phys_max", 8),
    ("dig_min", 8),
    ("dig_max", 8),
    ("prefiltering", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)

_ONSET_RE = re.compile(rb"[+-]\d+(\.\d*)?")
_DURATION_RE = re.compile(rb"\d+(\.\d*)?")

# multipliers to microvolts
_UNIT_SCALE = {"uV": 1.0, "µV": 1.0, "mV": 1e3, "V": 1e6, "nV": 1e-3}


class EdfFormatError(ValueError):
    """Raised for malformed or unsupported EDF content."""


@dataclass(frozen=True)
class SignalHeader:
    label: str
    physical_dim: str
    phys_min: float
    phys_max: float
    dig_min: int
    dig_max: int
    samples_per_record: int
    prefiltering: str = ""
    transducer: str = ""

    @property
    def is_annotation(self) -> bool:
        return self.label == ANNOTATION_LABEL

    @property
    def gain(self) -> float:
        return (self.phys_max - self.phys_min) / (self.dig_max - self.dig_min)


@dataclass(frozen=True)
class EdfHeader:
    version: str
    patient_id: str
    recording_id: str
    start_datetime: datetime.datetime | None
    header_bytes: int
    n_records: int
    record_duration: float
    n_signals: int
    signals: tuple[SignalHeader, ...]
    reserved: str = ""

    @property
    def record_bytes(self) -> int:
        return 2 * sum(s.samples_per_record for s in self.signals)

    @property
    def is_edfplus(self) -> bool:
        return self.reserved.startswith("EDF+")


@dataclass(frozen=True)
class AnnotationEvent:
    onset: float
    duration: float
    label: str

    def __post_init__(self):
        if self.onset < 0:
            raise ValueError(f"negative onset {self.onset}")
        if self.duration < 0:
            raise ValueError(f"negative duration {self.duration}")


@dataclass(frozen=True)
class Recording:
    """Continuous multichannel EEG in microvolts.

    ``data`` has shape (n_channels, n_samples).
    """

    channel_labels: tuple[str, ...]
    sampling_rate: float
    data: np.ndarray
    events: tuple[AnnotationEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError(f"data must be 2-D (channels x samples), got {data.shape}")
        if data.shape[0] != len(self.channel_labels):
            raise ValueError(
                f"{len(self.channel_labels)} labels for {data.shape[0]} channels"
            )
        if not self.sampling_rate > 0:
            raise ValueError("sampling_rate must be positive")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channel_labels", tuple(self.channel_labels))
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sampling_rate


def _ascii(raw: bytes) -> str:
    return raw.decode("ascii", errors="replace").strip()


def _number(raw: bytes, name: str, kind=float):
    text = _ascii(raw)
    try:
        return kind(text)
    except ValueError:
        # some writers emit integers like "-32768.0"
        if kind is int:
            try:
                value = float(text)
            except ValueError:
                pass
            else:
                if value.is_integer():
                    return int(value)
        raise EdfFormatError(f"non-numeric value {text!r} in field {name!r}") from None


def _parse_start(date: str, time: str) -> datetime.datetime | None:
    try:
        dd, mm, yy = (int(p) for p in date.split("."))
        hh, mi, ss = (int(p) for p in time.split("."))
    except ValueError:
        return None
    # EDF clipping date convention
    year = 1900 + yy if yy >= 85 else 2000 + yy
    try:
        return datetime.datetime(year, mm, dd, hh, mi, ss)
    except ValueError:
        return None


def parse_header(raw: bytes) -> EdfHeader:
    """Decode the fixed and per-signal header blocks of an EDF file.

    Parameters
    ----------
    raw : bytes
        File content; only the header portion is inspected.

    Returns
    -------
    EdfHeader

    Raises
    ------
    EdfFormatError
        On truncation, non-numeric numeric fields, or a header length that does
        not match the signal count.
    """
    if len(raw) < 256:
        raise EdfFormatError(f"truncated header: {len(raw)} bytes, need at least 256")
    fields = {}
    pos = 0
    for name, width in _MAIN_FIELDS:
        fields[name] = raw[pos : pos + width]
        pos += width

    n_signals = _number(fields["n_signals"], "n_signals", int)
    header_bytes = _number(fields["header_bytes"], "header_bytes", int)
    if n_signals < 0:
        raise EdfFormatError(f"negative signal count {n_signals}")
    if header_bytes != 256 * (n_signals + 1):
        raise EdfFormatError(
            f"header_bytes={header_bytes} inconsistent with {n_signals} signals "
            f"(expected {256 * (n_signals + 1)})"
        )
    if len(raw) < header_bytes:
        raise EdfFormatError(
            f"truncated header: {len(raw)} bytes, need {header_bytes}"
        )

    per_signal = {}
    for name, width in _SIGNAL_FIELDS:
        per_signal[name] = [
            raw[pos + i * width : pos + (i + 1) * width] for i in range(n_signals)
        ]
        pos += width * n_signals

    signals = []
    for i in range(n_signals):
        sig = SignalHeader(
            label=_ascii(per_signal["label"][i]),
            transducer=_ascii(per_signal["transducer"][i]),
            physical_dim=_ascii(per_signal["physical_dim"][i]),
            phys_min=_number(per_signal["phys_min"][i], "phys_min"),
            phys_max=_number(per_signal["phys_max"][i], "phys_max"),
            dig_min=_number(per_signal["dig_min"][i], "dig_min", int),
            dig_max=_number(per_signal["dig_max"][i], "dig_max", int),
            prefiltering=_ascii(per_signal["prefiltering"][i]),
            samples_per_record=_number(
                per_signal["samples_per_record"][i], "samples_per_record", int
            ),
        )
        if not sig.is_annotation:
            if sig.dig_min >= sig.dig_max:
                raise EdfFormatError(f"signal {sig.label!r}: dig_min >= dig_max")
            if sig.phys_min == sig.phys_max:
                raise EdfFormatError(f"signal {sig.label!r}: phys_min == phys_max")
        signals.append(sig)

    n_records = _number(fields["n_records"], "n_records", int)
    record_duration = _number(fields["record_duration"], "record_duration")
    if n_records < 0:
        # -1 marks an unfinished recording; the data region decides
        n_records = -1
    has_data = any(not s.is_annotation for s in signals)
    if has_data and not record_duration > 0:
        raise EdfFormatError(f"record_duration must be positive, got {record_duration}")

    return EdfHeader(
        version=_ascii(fields["version"]),
        patient_id=_ascii(fields["patient_id"]),
        recording_id=_ascii(fields["recording_id"]),
        start_datetime=_parse_start(_ascii(fields["startdate"]), _ascii(fields["starttime"])),
        header_bytes=header_bytes,
        n_records=n_records,
        record_duration=record_duration,
        n_signals=n_signals,
        signals=tuple(signals),
        reserved=_ascii(fields["reserved"]),
    )


def parse_annotations(tal_bytes: bytes) -> list[AnnotationEvent]:
    """Parse a block of time-stamped annotation lists.

    Each TAL is ``onset [0x15 duration] 0x14 (label 0x14)* 0x00``. Trailing
    0x00 padding is ignored and TALs with no label (timekeeping entries)
    produce no events. Events are returned sorted by onset.
    """
    events = []
    data = bytes(tal_bytes)
    pos, end = 0, len(data)
    while pos < end:
        if data[pos] == 0:
            pos += 1
            continue
        stop = data.find(b"\x00", pos)
        if stop < 0:
            raise EdfFormatError(f"TAL starting at byte {pos} has no 0x00 terminator")
        tal = data[pos:stop]
        pos = stop + 1
        if not tal.endswith(b"\x14"):
            raise EdfFormatError(f"malformed TAL {tal!r}: missing 0x14 before terminator")
        parts = tal[:-1].split(b"\x14")
        stamp, labels = parts[0], parts[1:]
        onset_raw, sep, duration_raw = stamp.partition(b"\x15")
        if not _ONSET_RE.fullmatch(onset_raw):
            raise EdfFormatError(f"malformed TAL onset {onset_raw!r}")
        onset = float(onset_raw)
        duration = 0.0
        if sep:
            if not _DURATION_RE.fullmatch(duration_raw):
                raise EdfFormatError(f"malformed TAL duration {duration_raw!r}")
            duration = float(duration_raw)
        for label in labels:
            if label:
                events.append(AnnotationEvent(onset, duration, _ascii(label)))
    events.sort(key=lambda e: e.onset)
    return events


def read_recording(raw: bytes) -> Recording:
    """Decode a complete EDF/EDF+ byte string into a :class:`Recording`.

    Digital samples are mapped to physical values with the per-signal affine
    transform and converted to microvolts; ``EDF Annotations`` signals are
    parsed into events instead of data.
    """
    header = parse_header(raw)
    data_signals = [i for i, s in enumerate(header.signals) if not s.is_annotation]
    annot_signals = [i for i, s in enumerate(header.signals) if s.is_annotation]
    if not data_signals:
        raise EdfFormatError("file has no data signals")

    record_bytes = header.record_bytes
    available = len(raw) - header.header_bytes
    n_records = header.n_records
    if n_records < 0:
        n_records = available // record_bytes
    if available < n_records * record_bytes:
        raise EdfFormatError(
            f"short data region: {available} bytes for {n_records} records "
            f"of {record_bytes} bytes"
        )

    spr = {header.signals[i].samples_per_record for i in data_signals}
    if len(spr) != 1:
        raise EdfFormatError(f"data signals have mixed sampling rates: {sorted(spr)}")
    samples_per_record = spr.pop()

    words = np.frombuffer(
        raw, dtype="<i2", count=n_records * record_bytes // 2, offset=header.header_bytes
    ).reshape(n_records, record_bytes // 2)

    offsets = np.cumsum([0] + [s.samples_per_record for s in header.signals])
    data = np.empty((len(data_signals), n_records * samples_per_record))
    for row, i in enumerate(data_signals):
        sig = header.signals[i]
        digital = words[:, offsets[i] : offsets[i + 1]].reshape(-1).astype(float)
        physical = (digital - sig.dig_min) * sig.gain + sig.phys_min
        data[row] = physical * _UNIT_SCALE.get(sig.physical_dim, 1.0)

    events = []
    for i in annot_signals:
        block = words[:, offsets[i] : offsets[i + 1]]
        for record in block:
            events.extend(parse_annotations(record.tobytes()))
    events.sort(key=lambda e: e.onset)

    return Recording(
        channel_labels=tuple(header.signals[i].label for i in data_signals),
        sampling_rate=samples_per_record / header.record_duration,
        data=data,
        events=tuple(events),
    )


def read_edf(path) -> Recording:
    with open(path, "rb") as fh:
        return read_recording(fh.read())


def _format_number(value: float, width: int = 8, direction: str = "nearest") -> str:
    """Shortest decimal text of at most ``width`` chars.

    ``direction`` ``"down"``/``"up"`` guarantee the parsed text is <= / >= value.
    """
    value = float(value)
    for decimals in range(width, -1, -1):
        step = 10.0**-decimals
        if direction == "down":
            candidate = math.floor(value / step) * step
        elif direction == "up":
            candidate = math.ceil(value / step) * step
        else:
            candidate = value
        text = f"{candidate:.{decimals}f}"
        if "." in text:
            text = text.rstrip("0").rstrip(".")
        if text in ("-0", ""):
            text = "0"
        if len(text) > width:
            continue
        parsed = float(text)
        if direction == "down" and parsed > value:
            continue
        if direction == "up" and parsed < value:
            continue
        return text
    raise ValueError(f"cannot represent {value!r} in {width} characters")


def _field(text: str, width: int) -> bytes:
    encoded = text.encode("ascii", errors="replace")
    if len(encoded) > width:
        raise ValueError(f"{text!r} does not fit in {width} bytes")
    return encoded.ljust(width, b" ")


def _format_tal_time(value: float, signed: bool) -> str:
    text = np.format_float_positional(float(value), trim="-")
    if signed and not text.startswith("-"):
        text = "+" + text
    return text


def _encode_tal(onset: float, duration: float | None, labels: Sequence[str]) -> bytes:
    out = _format_tal_time(onset, signed=True).encode("ascii")
    if duration:
        out += b"\x15" + _format_tal_time(duration, signed=False).encode("ascii")
    out += b"\x14"
    for label in labels:
        out += label.encode("ascii", errors="replace") + b"\x14"
    if not labels:
        out += b"\x14"
    return out + b"\x00"


def _choose_record_size(n_samples: int, fs: float) -> tuple[int, float]:
    """Pick samples-per-record dividing ``n_samples`` with an exact duration text."""
    candidates = []
    if float(fs).is_integer():
        candidates.append(int(fs))
    candidates.extend(d for d in range(1, n_samples + 1) if n_samples % d == 0)
    for spr in candidates:
        if spr <= 0 or n_samples % spr:
            continue
        duration = spr / fs
        try:
            text = _format_number(duration)
        except ValueError:
            continue
        if float(text) * fs == spr:
            return spr, float(text)
    raise ValueError(
        f"no record layout represents {n_samples} samples at {fs} Hz exactly"
    )


def write_edf(
    recording: Recording,
    header_meta: Mapping | None = None,
) -> bytes:
    """Serialise a recording as EDF+C bytes.

    Parameters
    ----------
    recording : Recording
        Data in microvolts; written with physical dimension ``uV``.
    header_meta : mapping, optional
        Overrides for header fields: ``patient_id``, ``recording_id``,
        ``start_datetime``, ``phys_min``/``phys_max`` (scalar or per channel),
        ``dig_min``/``dig_max``, ``prefiltering``, ``record_duration``.

    Raises
    ------
    ValueError
        If a sample falls outside the physical range supplied in
        ``header_meta``, or the layout cannot be represented.
    """
    meta = dict(header_meta or {})
    data = recording.data
    n_ch, n_samples = data.shape
    fs = recording.sampling_rate

    if "record_duration" in meta:
        spr_f = meta["record_duration"] * fs
        if not float(spr_f).is_integer() or n_samples % int(spr_f):
            raise ValueError("record_duration does not tile the recording")
        spr, duration = int(spr_f), float(meta["record_duration"])
    else:
        spr, duration = _choose_record_size(n_samples, fs)
    n_records = n_samples // spr

    dig_min = int(meta.get("dig_min", -32768))
    dig_max = int(meta.get("dig_max", 32767))
    if not -32768 <= dig_min < dig_max <= 32767:
        raise ValueError(f"invalid digital range [{dig_min}, {dig_max}]")

    if "phys_min" in meta or "phys_max" in meta:
        lo = np.broadcast_to(np.asarray(meta.get("phys_min", data.min()), float), (n_ch,))
        hi = np.broadcast_to(np.asarray(meta.get("phys_max", data.max()), float), (n_ch,))
        lo_text = [_format_number(v) for v in lo]
        hi_text = [_format_number(v) for v in hi]
        below = data < np.array([float(t) for t in lo_text])[:, None]
        above = data > np.array([float(t) for t in hi_text])[:, None]
        if below.any() or above.any():
            ch = int(np.nonzero((below | above).any(axis=1))[0][0])
            raise ValueError(
                f"channel {recording.channel_labels[ch]!r} exceeds the physical range "
                f"[{lo_text[ch]}, {hi_text[ch]}]"
            )
    else:
        lo = data.min(axis=1) if n_samples else np.zeros(n_ch)
        hi = data.max(axis=1) if n_samples else np.ones(n_ch)
        flat = hi <= lo
        lo = np.where(flat, lo - 1.0, lo)
        hi = np.where(flat, hi + 1.0, hi)
        lo_text = [_format_number(v, direction="down") for v in lo]
        hi_text = [_format_number(v, direction="up") for v in hi]
    phys_min = np.array([float(t) for t in lo_text])
    phys_max = np.array([float(t) for t in hi_text])
    if np.any(phys_max <= phys_min):
        raise ValueError("phys_max must exceed phys_min for every channel")

    scale = (dig_max - dig_min) / (phys_max - phys_min)
    digital = np.rint((data - phys_min[:, None]) * scale[:, None] + dig_min)
    digital = np.clip(digital, dig_min, dig_max).astype("<i2")

    # one timekeeping TAL per record, events go in the record holding their onset
    tals = [[_encode_tal(r * duration, None, [])] for r in range(n_records)]
    for ev in recording.events:
        r = min(int(ev.onset // duration), n_records - 1) if n_records else 0
        tals[r].append(_encode_tal(ev.onset, ev.duration, [ev.label]))
    annot_len = max((sum(len(t) for t in rec) for rec in tals), default=2)
    annot_spr = -(-annot_len // 2)

    start = meta.get("start_datetime") or datetime.datetime(2000, 1, 1)
    n_signals = n_ch + 1
    header = b"".join(
        [
            _field("0", 8),
            _field(meta.get("patient_id", "X X X X"), 80),
            _field(meta.get("recording_id", "Startdate X X X X"), 80),
            _field(start.strftime("%d.%m.%y"), 8),
            _field(start.strftime("%H.%M.%S"), 8),
            _field(str(256 * (n_signals + 1)), 8),
            _field("EDF+C", 44),
            _field(str(n_records), 8),
            _field(_format_number(duration), 8),
            _field(str(n_signals), 4),
        ]
    )
    prefilter = meta.get("prefiltering", "")
    columns = {
        "label": [*recording.channel_labels, ANNOTATION_LABEL],
        "transducer": [""] * n_signals,
        "physical_dim": ["uV"] * n_ch + [""],
        "phys_min": lo_text + ["-1"],
        "phys_max": hi_text + ["1"],
        "dig_min": [str(dig_min)] * n_ch + ["-32768"],
        "dig_max": [str(dig_max)] * n_ch + ["32767"],
        "prefiltering": [prefilter] * n_ch + [""],
        "samples_per_record": [str(spr)] * n_ch + [str(annot_spr)],
        "reserved": [""] * n_signals,
    }
    for name, width in _SIGNAL_FIELDS:
        header += b"".join(_field(v, width) for v in columns[name])

    body = bytearray()
    for r in range(n_records):
        body += digital[:, r * spr : (r + 1) * spr].tobytes()
        body += b"".join(tals[r]).ljust(2 * annot_spr, b"\x00")
    return header + bytes(body)
