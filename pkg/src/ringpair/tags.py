"""Channel-stamped detection records and their on-disk formats.

A stream is the digital twin of TDC output: (channel, timestamp) records
with integer picosecond timestamps, non-decreasing within each channel.

Binary QTAG layout (little endian):

    header, 48 bytes: magic ``QTAG`` (4s), version (u32), record count
    (u64), duration_ps (u64), seed (u64), 16 bytes of zero padding
    record, 16 bytes: channel_id (u32), reserved=0 (u32), timestamp_ps (u64)

The CSV mirror is two columns with header ``channel,timestamp_ps``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EventCapExceeded, TagFormatError

QTAG_MAGIC = b"QTAG"
QTAG_VERSION = 1
_HEADER_STRUCT = struct.Struct("<4sIQQQ16x")   # 48 bytes
_RECORD_STRUCT = struct.Struct("<IIQ")         # 16 bytes
_RECORD_DTYPE = np.dtype([("channel", "<u4"), ("reserved", "<u4"), ("timestamp", "<u8")])

# Safety cap on generated/loaded records; exceeded -> explicit error.
MAX_RECORDS = 10**8


@dataclass(frozen=True)
class TimeTagStream:
    """Immutable detection-event stream.

    ``channels`` and ``timestamps_ps`` are parallel arrays sorted by time
    (ties keep channel order stable); ``duration`` is the wall-clock span
    of the acquisition in seconds and bounds every timestamp.
    """

    channels: np.ndarray       # uint32
    timestamps_ps: np.ndarray  # int64, picoseconds
    duration: float            # s
    seed: int = 0

    def __post_init__(self) -> None:
        ch = np.ascontiguousarray(self.channels, dtype=np.uint32)
        ts = np.ascontiguousarray(self.timestamps_ps, dtype=np.int64)
        if ch.shape != ts.shape or ch.ndim != 1:
            raise DomainError("channels and timestamps_ps must be parallel 1-D arrays")
        if self.duration <= 0:
            raise DomainError("duration must be positive")
        if ts.size:
            if ts.min() < 0 or ts.max() > self.duration_ps:
                raise DomainError("timestamps must lie in [0, duration]")
            for c in np.unique(ch):
                sel = ts[ch == c]
                if sel.size >= 2 and np.any(np.diff(sel) < 0):
                    raise DomainError(f"timestamps must be non-decreasing on channel {c}")
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "timestamps_ps", ts)

    @property
    def duration_ps(self) -> int:
        return int(round(self.duration * 1e12))

    @property
    def n_records(self) -> int:
        return int(self.channels.size)

    def channel_timestamps(self, channel: int) -> np.ndarray:
        """Time-sorted timestamps (ps) of one channel."""
        return self.timestamps_ps[self.channels == channel]

    def counts_by_channel(self) -> dict[int, int]:
        ids, counts = np.unique(self.channels, return_counts=True)
        return {int(i): int(n) for i, n in zip(ids, counts)}

    @classmethod
    def from_channel_arrays(cls, per_channel: dict[int, np.ndarray], duration: float,
                            seed: int = 0) -> "TimeTagStream":
        """Build a time-sorted stream from per-channel timestamp arrays."""
        chs, tss = [], []
        for c, t in per_channel.items():
            t = np.asarray(t, dtype=np.int64)
            chs.append(np.full(t.size, c, dtype=np.uint32))
            tss.append(t)
        if chs:
            ch = np.concatenate(chs)
            ts = np.concatenate(tss)
            order = np.argsort(ts, kind="stable")
            ch, ts = ch[order], ts[order]
        else:
            ch = np.empty(0, dtype=np.uint32)
            ts = np.empty(0, dtype=np.int64)
        if ch.size > MAX_RECORDS:
            raise EventCapExceeded(f"{ch.size} records exceed the cap of {MAX_RECORDS}")
        return cls(channels=ch, timestamps_ps=ts, duration=duration, seed=seed)


def write_qtag(stream: TimeTagStream, path) -> None:
    """Write a stream in the binary QTAG format."""
    rec = np.empty(stream.n_records, dtype=_RECORD_DTYPE)
    rec["channel"] = stream.channels
    rec["reserved"] = 0
    rec["timestamp"] = stream.timestamps_ps.astype(np.uint64)
    with open(path, "wb") as fh:
        fh.write(_HEADER_STRUCT.pack(QTAG_MAGIC, QTAG_VERSION, stream.n_records,
                                     stream.duration_ps, stream.seed))
        fh.write(rec.tobytes())


def read_qtag(path) -> TimeTagStream:
    """Read a QTAG file; raises TagFormatError naming the offending byte offset."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER_STRUCT.size)
        if len(head) < _HEADER_STRUCT.size:
            raise TagFormatError(f"{path}: truncated header at byte {len(head)}")
        magic, version, count, duration_ps, seed = _HEADER_STRUCT.unpack(head)
        if magic != QTAG_MAGIC:
            raise TagFormatError(f"{path}: bad magic {magic!r} at byte 0")
        if version != QTAG_VERSION:
            raise TagFormatError(f"{path}: unsupported version {version} at byte 4")
        if count > MAX_RECORDS:
            raise EventCapExceeded(f"{path}: {count} records exceed the cap of {MAX_RECORDS}")
        body = fh.read(count * _RECORD_STRUCT.size)
    if len(body) < count * _RECORD_STRUCT.size:
        raise TagFormatError(
            f"{path}: truncated records at byte {_HEADER_STRUCT.size + len(body)}")
    rec = np.frombuffer(body, dtype=_RECORD_DTYPE, count=count)
    return TimeTagStream(
        channels=rec["channel"].astype(np.uint32),
        timestamps_ps=rec["timestamp"].astype(np.int64),
        duration=duration_ps / 1e12 if duration_ps else 1e-12,
        seed=int(seed),
    )


def write_tag_csv(stream: TimeTagStream, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel", "timestamp_ps"])
        for c, t in zip(stream.channels, stream.timestamps_ps):
            w.writerow([int(c), int(t)])


def read_tag_csv(path, duration: float | None = None, seed: int = 0) -> TimeTagStream:
    """Read the CSV mirror; duration defaults to the last timestamp."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [s.strip() for s in rows[0]] != ["channel", "timestamp_ps"]:
        raise TagFormatError(f"{path}: expected header 'channel,timestamp_ps'")
    if len(rows) - 1 > MAX_RECORDS:
        raise EventCapExceeded(f"{path}: {len(rows) - 1} records exceed the cap")
    ch = np.array([int(r[0]) for r in rows[1:]], dtype=np.uint32)
    ts = np.array([int(r[1]) for r in rows[1:]], dtype=np.int64)
    if duration is None:
        duration = (ts.max() / 1e12) if ts.size else 1e-12
    return TimeTagStream(channels=ch, timestamps_ps=ts, duration=duration, seed=seed)
