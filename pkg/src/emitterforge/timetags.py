"""Time-tag streams and their on-disk formats.

A stream is a globally time-ordered list of (channel, timestamp) records on a
fixed tick grid. The binary format is deliberately minimal:

couple of header fields, little-endian::

    bytes 0-3   magic "TTG1" (ASCII)
    bytes 4-5   u16 format version (currently 1)
    bytes 6-13  u64 tick resolution in picoseconds
    bytes 14-21 u64 record count
    then        records of u8 channel + u64 timestamp in ticks,
                sorted by timestamp

A CSV rendering (``channel,timestamp_ps``) is provided for spreadsheet use;
it preserves timestamps exactly but flattens the tick size to 1 ps.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError

MAGIC = b"TTG1"
VERSION = 1
_HEADER = struct.Struct("<4sHQQ")
_RECORD_DTYPE = np.dtype([("channel", "u1"), ("timestamp", "<u8")])
RECORD_SIZE = _RECORD_DTYPE.itemsize  # 9 bytes, packed


@dataclass
class TimeTagStream:
    """Time-ordered detection events on an integer tick grid.

    Parameters
    ----------
    resolution : float
        Seconds per tick. Must be an integer number of picoseconds to be
        writable as a binary file.
    channels : ndarray of uint8
    timestamps : ndarray of int64
        Tick values, globally non-decreasing.
    duration : float
        Acquisition span in seconds. All timestamps satisfy
        ``timestamp * resolution < duration``.
    """

    resolution: float
    channels: np.ndarray
    timestamps: np.ndarray
    duration: float
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.uint8)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if self.channels.shape != self.timestamps.shape:
            raise DomainError("channels and timestamps must have equal length")
        if self.resolution <= 0:
            raise DomainError("resolution must be positive")
        if self.duration < 0:
            raise DomainError("duration must be nonnegative")
        if self.timestamps.size:
            if self.timestamps[0] < 0:
                raise DomainError("timestamps must be nonnegative")
            if np.any(np.diff(self.timestamps) < 0):
                raise DomainError("timestamps must be non-decreasing")

    @classmethod
    def from_times(
        cls,
        times_s: np.ndarray,
        channel: int,
        resolution: float,
        duration: float,
    ) -> "TimeTagStream":
        """Quantize float arrival times (seconds) onto the tick grid."""
        times_s = np.asarray(times_s, dtype=np.float64)
        ticks = np.floor(times_s / resolution).astype(np.int64)
        ticks.sort(kind="stable")
        channels = np.full(ticks.shape, channel, dtype=np.uint8)
        return cls(resolution, channels, ticks, duration)

    @property
    def n_tags(self) -> int:
        return int(self.timestamps.size)

    def channel_list(self) -> list[int]:
        return sorted(int(c) for c in np.unique(self.channels))

    def select(self, channel: int) -> "TimeTagStream":
        """Sub-stream containing only one channel (same resolution/duration)."""
        mask = self.channels == channel
        return TimeTagStream(
            self.resolution, self.channels[mask], self.timestamps[mask], self.duration
        )

    def times(self, channel: int | None = None) -> np.ndarray:
        """Tag times in seconds, optionally restricted to one channel."""
        ts = self.timestamps if channel is None else self.timestamps[self.channels == channel]
        return ts * self.resolution

    def rate(self, channel: int | None = None) -> float:
        """Mean count rate in counts/second over the acquisition."""
        if self.duration == 0:
            return 0.0
        n = self.n_tags if channel is None else int(np.sum(self.channels == channel))
        return n / self.duration


def merge_streams(*streams: TimeTagStream) -> TimeTagStream:
    """Merge streams on a common tick grid into one time-ordered stream.

    Ties on identical timestamps are broken by channel, then by source
    position, so the result does not depend on how merging is parallelized.
    """
    if not streams:
        raise DomainError("need at least one stream")
    resolution = streams[0].resolution
    for s in streams:
        if s.resolution != resolution:
            raise DomainError("streams have mismatched resolutions")
    channels = np.concatenate([s.channels for s in streams])
    timestamps = np.concatenate([s.timestamps for s in streams])
    source = np.concatenate(
        [np.full(s.n_tags, i, dtype=np.int64) for i, s in enumerate(streams)]
    )
    order = np.lexsort((source, channels, timestamps))
    duration = max(s.duration for s in streams)
    return TimeTagStream(resolution, channels[order], timestamps[order], duration)


def _resolution_ps(resolution: float) -> int:
    ps = resolution / 1e-12
    if abs(ps - round(ps)) > 1e-6 or round(ps) < 1:
        raise DomainError(
            f"tick resolution {resolution!r} s is not an integer number of picoseconds"
        )
    return int(round(ps))


def write_timetags(stream: TimeTagStream, path) -> None:
    """Write a stream in the binary format described in the module docstring."""
    header = _HEADER.pack(MAGIC, VERSION, _resolution_ps(stream.resolution), stream.n_tags)
    records = np.empty(stream.n_tags, dtype=_RECORD_DTYPE)
    records["channel"] = stream.channels
    records["timestamp"] = stream.timestamps.astype(np.uint64)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())


def read_timetags(path) -> TimeTagStream:
    """Read a binary tag file, validating structure as it goes.

    Raises
    ------
    FormatError
        With ``offset`` set to the byte position of the first violation.
        The acquisition duration is not stored in the file; it is recovered
        as (last timestamp + 1 tick).
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError(
            f"file too short for header ({len(data)} bytes)", offset=len(data)
        )
    magic, version, res_ps, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if res_ps == 0:
        raise FormatError("resolution must be nonzero", offset=6)
    body = data[_HEADER.size:]
    expected = count * RECORD_SIZE
    if len(body) != expected:
        # offset of the first missing/extra byte
        raise FormatError(
            f"expected {count} records ({expected} bytes), found {len(body)} bytes",
            offset=_HEADER.size + min(len(body), expected),
        )
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    timestamps = records["timestamp"].astype(np.int64)
    if timestamps.size:
        bad = np.flatnonzero(np.diff(timestamps) < 0)
        if bad.size:
            i = int(bad[0]) + 1
            raise FormatError(
                f"timestamps decrease at record {i}",
                offset=_HEADER.size + i * RECORD_SIZE,
            )
    resolution = res_ps * 1e-12
    duration = float(timestamps[-1] + 1) * resolution if timestamps.size else 0.0
    return TimeTagStream(resolution, records["channel"].copy(), timestamps, duration)


def write_timetags_csv(stream: TimeTagStream, path) -> None:
    """CSV rendering with absolute picosecond timestamps."""
    res_ps = _resolution_ps(stream.resolution)
    with open(path, "w") as fh:
        fh.write("channel,timestamp_ps\n")
        for ch, ts in zip(stream.channels.tolist(), stream.timestamps.tolist()):
            fh.write(f"{ch},{ts * res_ps}\n")


def read_timetags_csv(path) -> TimeTagStream:
    """Read the CSV rendering back (tick size becomes 1 ps)."""
    channels: list[int] = []
    times_ps: list[int] = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "channel,timestamp_ps":
            raise FormatError(f"bad CSV header {header!r}", offset=1)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise FormatError(f"expected 2 fields on line {lineno}", offset=lineno)
            try:
                channels.append(int(parts[0]))
                times_ps.append(int(parts[1]))
            except ValueError:
                raise FormatError(
                    f"non-integer field on line {lineno}", offset=lineno
                ) from None
    timestamps = np.asarray(times_ps, dtype=np.int64)
    if timestamps.size and np.any(np.diff(timestamps) < 0):
        i = int(np.flatnonzero(np.diff(timestamps) < 0)[0]) + 1
        raise FormatError(f"timestamps decrease on line {i + 2}", offset=i + 2)
    duration = float(timestamps[-1] + 1) * 1e-12 if timestamps.size else 0.0
    return TimeTagStream(1e-12, np.asarray(channels, dtype=np.uint8), timestamps, duration)
