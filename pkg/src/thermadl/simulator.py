"""Deterministic synthetic thermal scenes.

The room is a flat ambient field; a present person is a Gaussian heat blob
centred on the scheduled location, narrow when upright and wide when lying.
Per-pixel noise is drawn from a generator keyed on (seed, instant), so any
frame can be re-rendered in isolation and reproduces bit for bit.

Scene files are plain text: ``key = value`` settings, ``location`` lines and
``day`` blocks of ``HH:MM-HH:MM what [posture=..] [offset=..]`` intervals,
where ``what`` is a location name, ``away`` or ``outage``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta
from importlib import resources
from pathlib import Path

import numpy as np

from .classification import ActivityTimeline
from .model import COLS, DEFAULT_PERIOD, ROWS, ActivityClass, ThermalFrame, format_timestamp, parse_clock, to_timestamp

AWAY = "away"
OUTAGE = "outage"
POSTURES = ("upright", "lying")
_YY, _XX = np.mgrid[0:ROWS, 0:COLS]


class ConfigError(ValueError):
    def __init__(self, message: str, lineno: int | None = None, source: str = "<config>"):
        self.lineno = lineno
        where = f"{source}:{lineno}: " if lineno is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class Location:
    row: float
    col: float
    cls: ActivityClass
    posture: str = "upright"


@dataclass(frozen=True)
class Scene:
    ambient: float = 22.0
    noise_sigma: float = 0.3
    skin_proxy: float = 32.0
    # lying reads cooler than upright by this much, split evenly around skin_proxy
    posture_gap: float = 3.0
    blob_sigma: dict = field(default_factory=lambda: {"upright": 1.0, "lying": 2.2})
    locations: dict = field(
        default_factory=lambda: {
            "bed": Location(8, 3, ActivityClass.SLEEPING, "lying"),
            "work_table": Location(3, 12, ActivityClass.DAILY, "upright"),
            "dining_table": Location(9, 12, ActivityClass.DAILY, "upright"),
        }
    )
    seed: int = 0

    def __post_init__(self):
        if self.skin_proxy - self.posture_gap / 2 <= self.ambient:
            raise ValueError("skin temperature must exceed ambient in every posture")
        if self.blob_sigma["lying"] <= self.blob_sigma["upright"]:
            raise ValueError("lying blob must be wider than upright")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    def skin(self, posture: str) -> float:
        half = self.posture_gap / 2
        return self.skin_proxy + half if posture == "upright" else self.skin_proxy - half


@dataclass(frozen=True)
class Interval:
    start: int
    end: int
    what: str
    posture: str | None = None
    offset: float = 0.0

    @property
    def present(self) -> bool:
        return self.what not in (AWAY, OUTAGE)


@dataclass(frozen=True)
class Schedule:
    intervals: tuple

    def __post_init__(self):
        ivs = tuple(sorted(self.intervals, key=lambda iv: iv.start))
        for a, b in zip(ivs, ivs[1:]):
            if b.start < a.end:
                raise ValueError(f"intervals overlap at {format_timestamp(b.start)}")
        for iv in ivs:
            if iv.end <= iv.start:
                raise ValueError("interval end must follow its start")
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "_starts", [iv.start for iv in ivs])

    @property
    def start(self) -> int:
        return self.intervals[0].start

    @property
    def end(self) -> int:
        return self.intervals[-1].end

    def at(self, instant: int) -> Interval | None:
        i = bisect.bisect_right(self._starts, instant) - 1
        if i >= 0 and instant < self.intervals[i].end:
            return self.intervals[i]
        return None

    def without_offsets(self) -> "Schedule":
        return Schedule(tuple(replace(iv, offset=0.0) for iv in self.intervals))


@dataclass(frozen=True)
class Scenario:
    scene: Scene
    schedule: Schedule
    period: int = DEFAULT_PERIOD
    tz_offset_min: int = 0


@dataclass
class SimulationResult:
    frames: list
    truth: ActivityTimeline


def _noise(scene: Scene, instant: int) -> np.ndarray:
    if scene.noise_sigma == 0:
        return np.zeros((ROWS, COLS))
    rng = np.random.default_rng([scene.seed & 0xFFFFFFFFFFFFFFFF, instant & 0xFFFFFFFFFFFFFFFF])
    return rng.normal(0.0, scene.noise_sigma, (ROWS, COLS))


def person_field(scene: Scene, location: str, posture: str | None = None, offset: float = 0.0) -> np.ndarray:
    """Noise-free temperature grid with the person at ``location``."""
    loc = scene.locations[location]
    posture = posture or loc.posture
    sigma = scene.blob_sigma[posture]
    d2 = (_YY - loc.row) ** 2 + (_XX - loc.col) ** 2
    return scene.ambient + (scene.skin(posture) + offset - scene.ambient) * np.exp(-d2 / (2 * sigma**2))


def render_frame(scene: Scene, schedule: Schedule, instant: int) -> ThermalFrame:
    iv = schedule.at(instant)
    if iv is not None and iv.present:
        grid = person_field(scene, iv.what, iv.posture, iv.offset)
    else:
        grid = np.full((ROWS, COLS), scene.ambient)
    return ThermalFrame(instant, grid + _noise(scene, instant))


def truth_label(scene: Scene, iv: Interval | None) -> ActivityClass:
    if iv is None or iv.what == AWAY:
        return ActivityClass.NO_ACTIVITY
    if iv.what == OUTAGE:
        return ActivityClass.MISSING
    return scene.locations[iv.what].cls


def run(scene: Scene, schedule: Schedule, period: int = DEFAULT_PERIOD) -> SimulationResult:
    """One frame per grid instant over the schedule span, skipping outages.

    Also returns the ground-truth timeline on the same grid.
    """
    if period <= 0:
        raise ValueError("period must be positive")
    frames, labels = [], []
    for instant in range(schedule.start, schedule.end, period):
        iv = schedule.at(instant)
        label = truth_label(scene, iv)
        labels.append(int(label))
        if label != ActivityClass.MISSING:
            frames.append(render_frame(scene, schedule, instant))
    return SimulationResult(frames, ActivityTimeline(schedule.start, period, labels))


def reference_frames(scene: Scene, location: str, n: int = 30, instant: int = 0) -> list:
    """Calibration captures with the person at ``location`` in its usual posture."""
    base = person_field(scene, location)
    return [ThermalFrame(instant + i, base + _noise(scene, instant + i)) for i in range(n)]


# -- text config ----------------------------------------------------------------

_SCENE_KEYS = {
    "ambient": float,
    "noise_sigma": float,
    "skin_proxy": float,
    "posture_gap": float,
    "sigma_upright": float,
    "sigma_lying": float,
    "seed": int,
    "period": int,
    "tz_offset_min": int,
}


def parse_scenario(text: str, source: str = "<config>") -> Scenario:
    settings: dict = {}
    locations: dict = {}
    intervals: list = []
    day: date | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("day "):
                day = date.fromisoformat(line[4:].strip())
            elif line.startswith("location "):
                name, _, spec = line[len("location ") :].partition("=")
                parts = [p.strip() for p in spec.split(",")]
                if not name.strip() or len(parts) not in (3, 4):
                    raise ValueError("expected 'location NAME = ROW, COL, CLASS[, POSTURE]'")
                posture = parts[3] if len(parts) == 4 else "upright"
                if posture not in POSTURES:
                    raise ValueError(f"unknown posture {posture!r}")
                locations[name.strip()] = Location(float(parts[0]), float(parts[1]), ActivityClass.parse(parts[2]), posture)
            elif "=" in line and line[0].isalpha():
                key, _, value = (s.strip() for s in line.partition("="))
                if key not in _SCENE_KEYS:
                    raise ValueError(f"unknown setting {key!r}")
                settings[key] = _SCENE_KEYS[key](value)
            else:
                if day is None:
                    raise ValueError("interval before any 'day' line")
                intervals.append(_parse_interval(line, day, settings.get("tz_offset_min", 0)))
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc), lineno, source) from None
    for iv in intervals:
        if iv.present and iv.what not in (locations or Scene().locations):
            raise ConfigError(f"interval uses unknown location {iv.what!r}", None, source)
    if not intervals:
        raise ConfigError("no schedule intervals", None, source)
    scene_kwargs = {k: settings[k] for k in ("ambient", "noise_sigma", "skin_proxy", "posture_gap", "seed") if k in settings}
    sigma = dict(Scene().blob_sigma)
    sigma.update({p: settings[f"sigma_{p}"] for p in POSTURES if f"sigma_{p}" in settings})
    try:
        scene = Scene(blob_sigma=sigma, **scene_kwargs, **({"locations": locations} if locations else {}))
        schedule = Schedule(tuple(intervals))
    except ValueError as exc:
        raise ConfigError(str(exc), None, source) from None
    return Scenario(scene, schedule, settings.get("period", DEFAULT_PERIOD), settings.get("tz_offset_min", 0))


def _parse_interval(line: str, day: date, tz_offset_min: int) -> Interval:
    fields = line.split()
    if len(fields) < 2 or "-" not in fields[0]:
        raise ValueError(f"malformed interval line {line!r}")
    lo, hi = fields[0].split("-", 1)
    midnight = to_timestamp(datetime(day.year, day.month, day.day)) - tz_offset_min * 60
    start = midnight + parse_clock(lo) * 60
    end = midnight + parse_clock(hi) * 60
    if end <= start:
        raise ValueError(f"interval {fields[0]} ends before it starts")
    posture, offset = None, 0.0
    for opt in fields[2:]:
        key, _, value = opt.partition("=")
        if key == "posture" and value in POSTURES:
            posture = value
        elif key == "offset":
            offset = float(value)
        else:
            raise ValueError(f"unknown interval option {opt!r}")
    return Interval(start, end, fields[1], posture, offset)


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), str(path))


def default_scenario_text() -> str:
    return resources.files("thermadl.data").joinpath("default_scenario.txt").read_text()


def default_scenario(seed: int | None = None) -> Scenario:
    """Eleven monitored days whose per-day hours and bathroom visits match the
    bundled reference tables."""
    sc = parse_scenario(default_scenario_text(), "default_scenario.txt")
    if seed is not None:
        sc = replace(sc, scene=replace(sc.scene, seed=seed))
    return sc


def day_start(day: date, tz_offset_min: int = 0) -> int:
    return to_timestamp(datetime(day.year, day.month, day.day)) - tz_offset_min * 60


def one_day(day: date, what: str, tz_offset_min: int = 0) -> Schedule:
    start = day_start(day, tz_offset_min)
    return Schedule((Interval(start, start + int(timedelta(days=1).total_seconds()), what),))
