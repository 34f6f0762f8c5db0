"""Event stream data model, file I/O, and temporal binning.

An event is an asynchronous sensor record (t, x, y, p): timestamp in
microseconds, pixel column, pixel row, and polarity (+1 for an ON change,
-1 for OFF).  Streams are stored as numpy structured arrays sorted by
timestamp; binning slices a stream into contiguous half-open windows of
fixed duration.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EVENT_DTYPE = np.dtype([
    ("t", np.int64),
    ("x", np.int32),
    ("y", np.int32),
    ("p", np.int8),
])

# On-disk binary layout: 16-byte header (magic, u32 width, u32 height,
# u32 reserved), then 16-byte records (u64 t, u16 x, u16 y, i8 p, 3 pad).
BIN_MAGIC = b"EVS1"
_BIN_HEADER = np.dtype([
    ("magic", "S4"),
    ("width", "<u4"),
    ("height", "<u4"),
    ("reserved", "<u4"),
])
_BIN_RECORD = np.dtype({
    "names": ["t", "x", "y", "p"],
    "formats": ["<u8", "<u2", "<u2", "i1"],
    "offsets": [0, 8, 10, 12],
    "itemsize": 16,
})

_CSV_HEADER_RE = re.compile(r"^#\s*width=(\d+)\s+height=(\d+)\s*$")


class StreamFormatError(ValueError):
    """An event file could not be parsed (bad header, malformed record)."""


class StreamValidationError(ValueError):
    """Parsed events violate the declared sensor geometry or value ranges."""


@dataclass(frozen=True)
class Event:
    """A single polarity event. Mostly useful for construction and tests;
    bulk processing goes through structured arrays."""

    t: int
    x: int
    y: int
    p: int


@dataclass
class EventStream:
    """A time-sorted event record array with its sensor geometry.

    ``events`` is an EVENT_DTYPE structured array sorted by ``t``
    (non-decreasing, stable with respect to ingestion order).  ``resorted``
    flags streams whose source was not time-ordered and had to be sorted
    on load.
    """

    width: int
    height: int
    events: np.ndarray
    resorted: bool = False

    @classmethod
    def from_events(cls, width, height, events):
        """Build a validated stream from an iterable of Event records."""
        events = list(events)
        return cls.from_arrays(
            width, height,
            np.array([e.t for e in events], dtype=np.int64),
            np.array([e.x for e in events], dtype=np.int64),
            np.array([e.y for e in events], dtype=np.int64),
            np.array([e.p for e in events], dtype=np.int64))

    @classmethod
    def from_arrays(cls, width, height, t, x, y, p, validate=True):
        """Build a validated stream from per-component arrays.

        Sorts stably by timestamp when needed and sets ``resorted``.
        """
        if width <= 0 or height <= 0:
            raise StreamValidationError(f"invalid geometry {width}x{height}")
        ev = np.empty(len(t), dtype=EVENT_DTYPE)
        ev["t"] = t
        ev["x"] = x
        ev["y"] = y
        ev["p"] = p
        if validate:
            _validate_columns(ev, width, height)
        resorted = False
        if len(ev) > 1 and np.any(np.diff(ev["t"]) < 0):
            ev = ev[np.argsort(ev["t"], kind="stable")]
            resorted = True
        return cls(width=width, height=height, events=ev, resorted=resorted)

    def __len__(self):
        return len(self.events)

    @property
    def t_first(self):
        return int(self.events["t"][0])

    @property
    def t_last(self):
        return int(self.events["t"][-1])


@dataclass
class EventBin:
    """Events of one half-open time slice [t_start, t_end) of a stream."""

    t_start: int
    t_end: int
    events: np.ndarray
    index: int = 0
    width: int = 0
    height: int = 0

    def __post_init__(self):
        if self.t_start >= self.t_end:
            raise ValueError(
                f"bin interval [{self.t_start}, {self.t_end}) is empty")

    @property
    def duration(self):
        return self.t_end - self.t_start

    def __len__(self):
        return len(self.events)


def _validate_columns(ev, width, height, row_offset=0):
    """Raise StreamValidationError naming the first offending data row."""
    bad = (
        (ev["t"] < 0)
        | (ev["x"] < 0) | (ev["x"] >= width)
        | (ev["y"] < 0) | (ev["y"] >= height)
        | ((ev["p"] != 1) & (ev["p"] != -1))
    )
    if np.any(bad):
        i = int(np.argmax(bad))
        e = ev[i]
        raise StreamValidationError(
            f"row {i + 1 + row_offset}: event (t={e['t']}, x={e['x']}, "
            f"y={e['y']}, p={e['p']}) outside geometry {width}x{height} "
            f"or polarity not in {{1, -1}}")


def load_events(path, format=None, width=None, height=None):
    """Load an event stream from a CSV or binary file.

    ``format`` is "csv" or "bin"; when None it is inferred from the file
    suffix.  The file header declares the sensor geometry; ``width`` and
    ``height`` override it for headerless CSV files.

    Malformed lines or records raise StreamFormatError with the position;
    out-of-range events raise StreamValidationError naming the row.
    Unsorted timestamps are re-sorted stably and flagged via
    ``EventStream.resorted``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format is None:
        format = "bin" if path.suffix in (".bin", ".evs") else "csv"
    if format == "csv":
        return _load_csv(path, width, height)
    if format == "bin":
        return _load_bin(path)
    raise ValueError(f"unknown format {format!r}; expected 'csv' or 'bin'")


def _load_csv(path, width=None, height=None):
    t, x, y, p = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    data_start = 0
    if lines and lines[0].startswith("#"):
        m = _CSV_HEADER_RE.match(lines[0])
        if not m:
            raise StreamFormatError(
                f"{path}: line 1: unparseable header {lines[0]!r}")
        width, height = int(m.group(1)), int(m.group(2))
        data_start = 1
    if width is None or height is None:
        raise StreamFormatError(
            f"{path}: missing '# width=W height=H' header and no explicit "
            f"geometry given")
    for lineno, line in enumerate(lines[data_start:], start=data_start + 1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise StreamFormatError(
                f"{path}: line {lineno}: expected 't,x,y,p', got {line!r}")
        try:
            t.append(int(parts[0]))
            x.append(int(parts[1]))
            y.append(int(parts[2]))
            p.append(int(parts[3]))
        except ValueError as exc:
            raise StreamFormatError(
                f"{path}: line {lineno}: {exc}") from None
    return EventStream.from_arrays(
        width, height,
        np.asarray(t, dtype=np.int64), np.asarray(x, dtype=np.int64),
        np.asarray(y, dtype=np.int64), np.asarray(p, dtype=np.int64))


def _load_bin(path):
    raw = Path(path).read_bytes()
    if len(raw) < _BIN_HEADER.itemsize:
        raise StreamFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    header = np.frombuffer(raw, dtype=_BIN_HEADER, count=1)[0]
    if bytes(header["magic"]) != BIN_MAGIC:
        raise StreamFormatError(
            f"{path}: bad magic {bytes(header['magic'])!r}")
    payload = raw[_BIN_HEADER.itemsize:]
    if len(payload) % _BIN_RECORD.itemsize != 0:
        raise StreamFormatError(
            f"{path}: truncated record after record "
            f"{len(payload) // _BIN_RECORD.itemsize}")
    rec = np.frombuffer(payload, dtype=_BIN_RECORD)
    if len(rec) and rec["t"].max() > np.iinfo(np.int64).max:
        raise StreamValidationError(f"{path}: timestamp overflows int64")
    return EventStream.from_arrays(
        int(header["width"]), int(header["height"]),
        rec["t"].astype(np.int64), rec["x"].astype(np.int64),
        rec["y"].astype(np.int64), rec["p"].astype(np.int64))


def save_events(stream, path, format=None):
    """Write a stream to CSV or binary (inferred from suffix when None)."""
    path = Path(path)
    if format is None:
        format = "bin" if path.suffix in (".bin", ".evs") else "csv"
    if format == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# width={stream.width} height={stream.height}\n")
            for e in stream.events:
                fh.write(f"{e['t']},{e['x']},{e['y']},{e['p']}\n")
    elif format == "bin":
        header = np.zeros(1, dtype=_BIN_HEADER)
        header["magic"] = BIN_MAGIC
        header["width"] = stream.width
        header["height"] = stream.height
        rec = np.zeros(len(stream.events), dtype=_BIN_RECORD)
        rec["t"] = stream.events["t"]
        rec["x"] = stream.events["x"]
        rec["y"] = stream.events["y"]
        rec["p"] = stream.events["p"]
        with open(path, "wb") as fh:
            fh.write(header.tobytes())
            fh.write(rec.tobytes())
    else:
        raise ValueError(f"unknown format {format!r}; expected 'csv' or 'bin'")
    return path


def segment_into_bins(stream, bin_duration):
    """Slice a stream into contiguous half-open bins of fixed duration.

    Bins tile [t_first, t_last]; the final bin is padded to the full
    duration so every bin spans exactly ``bin_duration`` microseconds.
    Empty interior bins are retained.  An empty stream yields no bins.
    """
    if bin_duration <= 0:
        raise ValueError(f"bin_duration must be positive, got {bin_duration}")
    ev = stream.events
    if len(ev) == 0:
        return []
    t0 = int(ev["t"][0])
    span = int(ev["t"][-1]) - t0
    n_bins = span // bin_duration + 1
    edges = t0 + bin_duration * np.arange(n_bins + 1, dtype=np.int64)
    cuts = np.searchsorted(ev["t"], edges)
    return [
        EventBin(
            t_start=int(edges[k]), t_end=int(edges[k + 1]),
            events=ev[cuts[k]:cuts[k + 1]], index=k,
            width=stream.width, height=stream.height)
        for k in range(n_bins)
    ]
