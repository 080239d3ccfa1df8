"""Domain types, validation and the canonical frame CSV format.

Timestamps are integer Unix seconds (UTC) throughout the package; use
:func:`to_datetime` / :func:`to_local` to render them as clock times.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

ROWS = 12
COLS = 16
N_PIXELS = ROWS * COLS
TEMP_MIN = -40.0
TEMP_MAX = 300.0
DEFAULT_PERIOD = 60


class FrameError(ValueError):
    """Base class for invalid frames."""


class WrongLength(FrameError):
    pass


class OutOfRange(FrameError):
    pass


class NonFinite(FrameError):
    pass


class StreamError(ValueError):
    """Malformed or non-monotonic frame stream."""


class ActivityClass(enum.IntEnum):
    """Activity labels. 1..3 are the monitored classes, MISSING marks absent frames."""

    MISSING = 0
    SLEEPING = 1
    DAILY = 2
    NO_ACTIVITY = 3

    @property
    def slug(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: "str | int | ActivityClass") -> "ActivityClass":
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        text = str(value).strip().lower().replace("-", "_")
        aliases = {"sleep": "sleeping", "noactivity": "no_activity", "none": "no_activity"}
        text = aliases.get(text, text)
        try:
            return cls[text.upper()]
        except KeyError:
            if text.isdigit():
                return cls(int(text))
            raise ValueError(f"unknown activity class {value!r}") from None


def to_datetime(ts: int) -> datetime:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc)


def to_local(ts: int, tz_offset_min: int = 0) -> datetime:
    """Naive wall-clock datetime for a UTC timestamp under a fixed offset."""
    return (to_datetime(ts) + timedelta(minutes=tz_offset_min)).replace(tzinfo=None)


def to_timestamp(value: "datetime | str | int") -> int:
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        if text.lstrip("-").isdigit():
            return int(text)
        value = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return int(value.timestamp())


def format_timestamp(ts: int) -> str:
    return to_datetime(ts).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True, eq=False)
class ThermalFrame:
    """One timestamped sensor capture.

    ``pixels`` is the row-major flat array of temperatures in degrees C; a
    (12, 16) input is flattened. Construction does not validate, see
    :func:`validate_frame`.
    """

    timestamp: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64).ravel()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "timestamp", int(self.timestamp))

    @property
    def grid(self) -> np.ndarray:
        """The (rows, cols) view of the pixels."""
        if self.pixels.size != N_PIXELS:
            raise WrongLength(f"expected {N_PIXELS} pixels, got {self.pixels.size}")
        return self.pixels.reshape(ROWS, COLS)

    @property
    def time(self) -> datetime:
        return to_datetime(self.timestamp)

    def __eq__(self, other):
        if not isinstance(other, ThermalFrame):
            return NotImplemented
        return self.timestamp == other.timestamp and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.timestamp, self.pixels.tobytes()))

    def __repr__(self):
        return f"ThermalFrame({format_timestamp(self.timestamp)}, n={self.pixels.size})"


def validate_frame(frame: ThermalFrame) -> ThermalFrame:
    """Return ``frame`` unchanged if it is a well-formed 16x12 capture.

    Raises WrongLength, NonFinite or OutOfRange, checked in that order.
    """
    px = frame.pixels
    if px.size != N_PIXELS:
        raise WrongLength(f"expected {N_PIXELS} pixels, got {px.size}")
    if not np.all(np.isfinite(px)):
        raise NonFinite(f"non-finite pixel at index {int(np.flatnonzero(~np.isfinite(px))[0])}")
    bad = (px < TEMP_MIN) | (px > TEMP_MAX)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise OutOfRange(f"pixel {i} = {px[i]} outside [{TEMP_MIN}, {TEMP_MAX}]")
    return frame


def check_stream(frames: Iterable[ThermalFrame]) -> Iterator[ThermalFrame]:
    """Validate each frame and require strictly increasing timestamps."""
    last = None
    for frame in frames:
        validate_frame(frame)
        if last is not None and frame.timestamp <= last:
            raise StreamError(
                f"timestamp {format_timestamp(frame.timestamp)} does not follow "
                f"{format_timestamp(last)}"
            )
        last = frame.timestamp
        yield frame


@dataclass(frozen=True)
class FrameStats:
    min: float
    max: float
    mean: float


def frame_stats(frame: ThermalFrame) -> FrameStats:
    px = frame.pixels
    return FrameStats(float(px.min()), float(px.max()), float(px.mean()))


def mean_frame(frames: Sequence[ThermalFrame]) -> ThermalFrame:
    """Pixelwise mean of several captures, stamped with the last timestamp."""
    if not frames:
        raise ValueError("no frames to average")
    stack = np.stack([f.pixels for f in frames])
    return ThermalFrame(frames[-1].timestamp, stack.mean(axis=0))


@dataclass(frozen=True)
class RegionOfInterest:
    cls: ActivityClass
    label: str
    pixels: frozenset

    def __post_init__(self):
        object.__setattr__(self, "cls", ActivityClass.parse(self.cls))
        object.__setattr__(self, "pixels", frozenset((int(r), int(c)) for r, c in self.pixels))
        if self.cls not in (ActivityClass.SLEEPING, ActivityClass.DAILY):
            raise ValueError("a region of interest must be bound to SLEEPING or DAILY")
        if not self.pixels:
            raise ValueError(f"region {self.label!r} has no pixels")
        for r, c in self.pixels:
            if not (0 <= r < ROWS and 0 <= c < COLS):
                raise ValueError(f"region {self.label!r} pixel ({r}, {c}) out of bounds")

    @property
    def flat_index(self) -> np.ndarray:
        return np.array(sorted(r * COLS + c for r, c in self.pixels), dtype=np.intp)


@dataclass(frozen=True)
class ActivityArray:
    """Per-class temperature series sampled on a regular grid; NaN marks absent samples."""

    cls: ActivityClass
    start: int
    period: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @property
    def timestamps(self) -> np.ndarray:
        return self.start + self.period * np.arange(len(self.values), dtype=np.int64)

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)


@dataclass(frozen=True)
class MonitoringConfig:
    period: int = DEFAULT_PERIOD
    activation_delta: float = 2.0
    ambient_baseline: float = 22.0
    ambient_window_min: int = 60
    smoothing_window: int = 5
    roi_delta: float = 8.0
    reducer: str = "mean"
    bathroom_max: float = 90.0
    neighbor_min: float = 60.0
    outing_min: float = 60.0
    onset_min_sleep: float = 120.0
    night_owl_cutoff: str = "00:00"
    late_onset: str = "03:00"
    anomaly_delta: float = 2.0
    anomaly_min: float = 30.0
    tz_offset_min: int = 0
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.activation_delta <= 0 or self.roi_delta <= 0:
            raise ValueError("thresholds must be positive")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be an odd count >= 1")
        if self.reducer not in ("mean", "max"):
            raise ValueError("reducer must be 'mean' or 'max'")
        if min(self.bathroom_max, self.neighbor_min, self.outing_min) <= 0:
            raise ValueError("duration thresholds must be positive")
        for name in ("night_owl_cutoff", "late_onset"):
            parse_clock(getattr(self, name))

    @classmethod
    def from_mapping(cls, values: dict) -> "MonitoringConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "extras"}
        kwargs, extras = {}, {}
        for key, raw in values.items():
            if key not in known:
                extras[key] = raw
                continue
            default = cls.__dataclass_fields__[key].default
            kwargs[key] = type(default)(raw) if not isinstance(raw, type(default)) else raw
        return cls(**kwargs, extras=extras)


def parse_clock(text: str) -> int:
    """'HH:MM' -> minutes after midnight; '24:00' is allowed."""
    try:
        hh, mm = text.strip().split(":")
        minutes = int(hh) * 60 + int(mm)
    except ValueError:
        raise ValueError(f"bad clock time {text!r}") from None
    if not (0 <= minutes <= 24 * 60) or not (0 <= int(mm) < 60):
        raise ValueError(f"bad clock time {text!r}")
    return minutes


# -- canonical frame CSV ----------------------------------------------------

CSV_HEADER = ["timestamp"] + [f"p{i}" for i in range(N_PIXELS)]


def write_frames(path, frames: Iterable[ThermalFrame]) -> int:
    """Write frames as canonical CSV. Returns the number of rows written."""
    n = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for frame in check_stream(frames):
            writer.writerow([format_timestamp(frame.timestamp)] + [f"{t:.2f}" for t in frame.pixels])
            n += 1
    return n


def iter_frames(path) -> Iterator[ThermalFrame]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return
        if header != CSV_HEADER:
            raise StreamError(f"{path}: unexpected header")
        last = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != N_PIXELS + 1:
                raise StreamError(f"{path}:{lineno}: expected {N_PIXELS + 1} fields, got {len(row)}")
            try:
                ts = to_timestamp(row[0])
                px = np.array(row[1:], dtype=np.float64)
            except ValueError as exc:
                raise StreamError(f"{path}:{lineno}: {exc}") from None
            if last is not None and ts <= last:
                raise StreamError(f"{path}:{lineno}: non-monotonic timestamp {row[0]}")
            last = ts
            frame = ThermalFrame(ts, px)
            try:
                validate_frame(frame)
            except FrameError as exc:
                raise StreamError(f"{path}:{lineno}: {exc}") from None
            yield frame


def read_frames(path) -> list[ThermalFrame]:
    return list(iter_frames(path))


def is_close_frame(a: ThermalFrame, b: ThermalFrame, tol: float = 0.01) -> bool:
    return a.timestamp == b.timestamp and bool(np.all(np.abs(a.pixels - b.pixels) <= tol + 1e-9))

