"""
Time-tag streams and their file formats (see README.md in this package)
"""

import logging
import os
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from spadrecon.core.schemas import TICK_DURATION
from spadrecon.errors import InputError, NonMonotonicTagsError, ParseError

logger = logging.getLogger(__name__)

BINARY_MAGIC = b"SPTT"
BINARY_VERSION = 1
# magic, version, tick_ps, cycle_ticks, n_cycles, flags
BINARY_HEADER = struct.Struct("<4sIdQQI")
RECORD_DTYPE = np.dtype([("cycle", "<u4"), ("ticks", "<u8")])
FLAG_CONTINUOUS = 1


@dataclass(frozen=True)
class TimeTagStream:
    """Click times in ticks, one strictly increasing array per cycle"""
    cycles: tuple
    tick_duration: float = TICK_DURATION
    cycle_length: int = 0
    continuous: bool = False

    def __post_init__(self):
        cycles = tuple(np.asarray(c, dtype=np.int64) for c in self.cycles)
        for index, times in enumerate(cycles):
            if times.size and (np.any(np.diff(times) <= 0)):
                raise NonMonotonicTagsError(index)
            if times.size and (times[0] < 0 or times[-1] >= self.cycle_length):
                raise InputError(f"Cycle {index} has click times outside [0, {self.cycle_length})")
            times.setflags(write=False)
        object.__setattr__(self, "cycles", cycles)

    @property
    def n_cycles(self) -> int:
        return len(self.cycles)

    @property
    def total_clicks(self) -> int:
        return int(sum(times.size for times in self.cycles))

    @property
    def collection_time(self) -> float:
        """Total recorded time in s"""
        return self.n_cycles * self.cycle_length * self.tick_duration

    def clicks_per_cycle(self) -> np.ndarray:
        return np.array([times.size for times in self.cycles], dtype=np.int64)


def _group_records(cycle_index: np.ndarray, ticks: np.ndarray, n_cycles: int) -> List[np.ndarray]:
    """Split records into per-cycle arrays, keeping file order inside each cycle"""
    order = np.argsort(cycle_index, kind="stable")
    sorted_cycles = cycle_index[order]
    sorted_ticks = ticks[order]
    bounds = np.searchsorted(sorted_cycles, np.arange(n_cycles + 1))
    return [sorted_ticks[bounds[i]:bounds[i + 1]] for i in range(n_cycles)]


def _build_stream(cycle_index, ticks, header: Dict[str, float], n_cycles: Optional[int]) -> TimeTagStream:
    cycle_index = np.asarray(cycle_index, dtype=np.int64)
    ticks = np.asarray(ticks, dtype=np.int64)
    tick_duration = header.get("tick_ps", TICK_DURATION * 1e12) * 1e-12
    continuous = bool(header.get("continuous", 0))
    if n_cycles is None:
        n_cycles = int(cycle_index.max()) + 1 if cycle_index.size else 0
    if cycle_index.size and cycle_index.max() >= n_cycles:
        raise ParseError(f"Cycle index {int(cycle_index.max())} exceeds declared cycle count {n_cycles}")
    cycle_length = header.get("cycle_ticks")
    if cycle_length is None:
        cycle_length = int(ticks.max()) + 1 if ticks.size else 1
    per_cycle = _group_records(cycle_index, ticks, n_cycles)
    for index, times in enumerate(per_cycle):
        if times.size and np.any(np.diff(times) <= 0):
            raise NonMonotonicTagsError(index)
        if times.size and times[-1] >= cycle_length:
            raise ParseError(f"Tick {int(times[-1])} in cycle {index} is outside cycle length {int(cycle_length)}")
    return TimeTagStream(cycles=tuple(per_cycle), tick_duration=tick_duration,
                         cycle_length=int(cycle_length), continuous=continuous)


def _read_text(path: str) -> TimeTagStream:
    header: Dict[str, float] = {}
    cycles: List[int] = []
    ticks: List[int] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if not sep:
                    continue
                try:
                    header[key.strip()] = float(value)
                except ValueError:
                    raise ParseError(f"Bad header value {value.strip()!r} for {key.strip()!r}", line=line_number)
                continue
            fields = line.split("\t") if "\t" in line else line.split()
            if len(fields) != 2:
                raise ParseError(f"Expected 'cycle<TAB>ticks', got {line!r}", line=line_number)
            try:
                cycle, tick = int(fields[0]), int(fields[1])
            except ValueError:
                raise ParseError(f"Non-integer record {line!r}", line=line_number)
            if cycle < 0 or tick < 0:
                raise ParseError(f"Negative record {line!r}", line=line_number)
            cycles.append(cycle)
            ticks.append(tick)
    n_cycles = int(header["cycles"]) if "cycles" in header else None
    if "cycle_ticks" in header:
        header["cycle_ticks"] = int(header["cycle_ticks"])
    return _build_stream(cycles, ticks, header, n_cycles)


def _read_binary(path: str) -> TimeTagStream:
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < BINARY_HEADER.size:
        raise ParseError("File shorter than the binary header", offset=0)
    magic, version, tick_ps, cycle_ticks, n_cycles, flags = BINARY_HEADER.unpack_from(blob, 0)
    if magic != BINARY_MAGIC:
        raise ParseError(f"Bad magic {magic!r}", offset=0)
    if version != BINARY_VERSION:
        raise ParseError(f"Unsupported binary version {version}", offset=4)
    payload = len(blob) - BINARY_HEADER.size
    if payload % RECORD_DTYPE.itemsize:
        raise ParseError("Truncated record", offset=BINARY_HEADER.size + payload - payload % RECORD_DTYPE.itemsize)
    records = np.frombuffer(blob, dtype=RECORD_DTYPE, offset=BINARY_HEADER.size)
    header = {"tick_ps": tick_ps, "cycle_ticks": int(cycle_ticks), "continuous": flags & FLAG_CONTINUOUS}
    return _build_stream(records["cycle"].astype(np.int64), records["ticks"].astype(np.int64), header, int(n_cycles))


def _resolve_format(path: str, fmt: Optional[str]) -> str:
    if fmt in ("text", "binary"):
        return fmt
    if fmt not in (None, "auto"):
        raise InputError(f"Unknown tag format '{fmt}' (use 'text', 'binary' or 'auto')")
    return "binary" if os.path.splitext(path)[1].lower() in (".bin", ".sptt") else "text"


def read_time_tags(path: str, fmt: Optional[str] = None) -> TimeTagStream:
    """
    Read a tag file

    Args:
        path: File path
        fmt: "text", "binary" or None/"auto" (by extension: .bin/.sptt are binary)

    Returns:
        TimeTagStream with invariants enforced

    Raises:
        FileNotFoundError: If the file does not exist
        ParseError: On malformed content (with line or byte offset)
        NonMonotonicTagsError: If times inside a cycle are out of order
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Tag file not found: {path}")
    if _resolve_format(path, fmt) == "binary":
        return _read_binary(path)
    return _read_text(path)


def _flatten(stream: TimeTagStream):
    counts = stream.clicks_per_cycle()
    cycle_index = np.repeat(np.arange(stream.n_cycles, dtype=np.int64), counts)
    ticks = np.concatenate(stream.cycles) if stream.total_clicks else np.zeros(0, dtype=np.int64)
    return cycle_index, ticks


def write_time_tags(stream: TimeTagStream, path: str, fmt: Optional[str] = None) -> str:
    """Write a stream in the text or binary tag format; returns the path"""
    cycle_index, ticks = _flatten(stream)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    if _resolve_format(path, fmt) == "binary":
        records = np.empty(cycle_index.size, dtype=RECORD_DTYPE)
        records["cycle"] = cycle_index
        records["ticks"] = ticks
        flags = FLAG_CONTINUOUS if stream.continuous else 0
        with open(path, "wb") as handle:
            handle.write(BINARY_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, stream.tick_duration * 1e12,
                                            stream.cycle_length, stream.n_cycles, flags))
            handle.write(records.tobytes())
        return path

    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"#tick_ps={stream.tick_duration * 1e12:.6g}\n")
        handle.write(f"#cycle_ticks={stream.cycle_length}\n")
        handle.write(f"#cycles={stream.n_cycles}\n")
        if stream.continuous:
            handle.write("#continuous=1\n")
        handle.writelines(f"{c}\t{t}\n" for c, t in zip(cycle_index.tolist(), ticks.tolist()))
    return path


def stream_from_seconds(cycles: Sequence[Sequence[float]], cycle_length: float,
                        tick_duration: float = TICK_DURATION, continuous: bool = False) -> TimeTagStream:
    """Build a stream from click times in seconds (rounded to ticks)"""
    return TimeTagStream(
        cycles=tuple(np.rint(np.asarray(c, dtype=float) / tick_duration).astype(np.int64) for c in cycles),
        tick_duration=tick_duration,
        cycle_length=int(round(cycle_length / tick_duration)),
        continuous=continuous,
    )
