"""Behaviour reports over a labelled timeline.

Per-day period accounting, whole-period statistics, bathroom-visit and
outing inference, sleep-onset timing and occupied-temperature findings.
All clock times are local wall-clock times under a fixed UTC offset.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from statistics import median
from typing import Sequence

import numpy as np

from .classification import ActivityTimeline, Segment, run_lengths
from .model import ActivityClass, MonitoringConfig, parse_clock, to_local, to_timestamp
from .tracking import occupied_temperatures, person_avg_temperature

LABEL_ORDER = (
    ActivityClass.DAILY,
    ActivityClass.SLEEPING,
    ActivityClass.NO_ACTIVITY,
    ActivityClass.MISSING,
)
DISPLAY = {
    ActivityClass.DAILY: "Daily Activity",
    ActivityClass.SLEEPING: "Sleeping Activity",
    ActivityClass.NO_ACTIVITY: "No Activity",
    ActivityClass.MISSING: "Missing Data",
}
OCCUPIED = (ActivityClass.SLEEPING, ActivityClass.DAILY)
ONSET_WINDOW = ("20:00", "12:00")


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class DailySummary:
    date: date
    daily: float
    sleeping: float
    no_activity: float
    missing: float

    def hours(self, label: ActivityClass) -> float:
        return getattr(self, label.slug)

    @property
    def total(self) -> float:
        return self.daily + self.sleeping + self.no_activity + self.missing


@dataclass(frozen=True)
class LabelStats:
    mean_hours: float
    fraction: float


@dataclass(frozen=True)
class PeriodStats:
    days: int
    by_label: dict

    def __getitem__(self, label) -> LabelStats:
        return self.by_label[ActivityClass.parse(label)]


@dataclass(frozen=True)
class BathroomVisit:
    start: datetime
    duration_min: float


@dataclass(frozen=True)
class Outing:
    start: datetime
    duration_min: float


@dataclass(frozen=True)
class SleepReport:
    onsets: dict
    night_owl: bool
    median_onset_min: float | None
    late_days: list


@dataclass(frozen=True)
class Anomaly:
    start: datetime
    duration_min: float
    max_drop: float


@dataclass(frozen=True)
class TemperatureReport:
    period_avg: float
    mean_gap: float
    daily_gaps: dict
    anomalies: list


def _local_midnight_ts(day: date, tz_offset_min: int) -> int:
    return to_timestamp(datetime(day.year, day.month, day.day)) - tz_offset_min * 60


def covered_days(segments: Sequence[Segment], tz_offset_min: int = 0) -> list:
    if not segments:
        return []
    first = to_local(segments[0].start, tz_offset_min).date()
    last = to_local(segments[-1].end - 1, tz_offset_min).date()
    return [first + timedelta(days=i) for i in range((last - first).days + 1)]


def daily_summary(segments: Sequence[Segment], day: date, tz_offset_min: int = 0) -> DailySummary:
    """Hours per label within one local calendar day; uncovered time counts as missing."""
    lo = _local_midnight_ts(day, tz_offset_min)
    hi = lo + 86400
    seconds = dict.fromkeys(LABEL_ORDER, 0)
    for seg in segments:
        overlap = min(seg.end, hi) - max(seg.start, lo)
        if overlap > 0:
            seconds[seg.label] += overlap
    seconds[ActivityClass.MISSING] += 86400 - sum(seconds.values())
    return DailySummary(day, *(seconds[k] / 3600.0 for k in LABEL_ORDER))


def daily_summaries(segments: Sequence[Segment], tz_offset_min: int = 0) -> list:
    return [daily_summary(segments, d, tz_offset_min) for d in covered_days(segments, tz_offset_min)]


def aggregate_stats(summaries: Sequence[DailySummary]) -> PeriodStats:
    """Mean hours per day and fraction of the day for each label."""
    if not summaries:
        raise EmptyInput("no daily summaries")
    by_label = {}
    for label in LABEL_ORDER:
        mean = sum(s.hours(label) for s in summaries) / len(summaries)
        by_label[label] = LabelStats(mean, mean / 24.0)
    return PeriodStats(len(summaries), by_label)


def _is_long_activity(seg: Segment | None, minimum: float) -> bool:
    return seg is not None and seg.label in OCCUPIED and seg.duration_min >= minimum


def _is_bathroom(segments: Sequence[Segment], i: int, config: MonitoringConfig) -> bool:
    seg = segments[i]
    if seg.label != ActivityClass.NO_ACTIVITY or seg.duration_min > config.bathroom_max:
        return False
    before = segments[i - 1] if i > 0 else None
    after = segments[i + 1] if i + 1 < len(segments) else None
    return _is_long_activity(before, config.neighbor_min) and _is_long_activity(after, config.neighbor_min)


def infer_bathroom_visits(segments: Sequence[Segment], config: MonitoringConfig | None = None) -> list:
    """Short no-activity gaps flanked on both sides by long sleeping/daily periods."""
    config = config or MonitoringConfig()
    return [
        BathroomVisit(to_local(seg.start, config.tz_offset_min), seg.duration_min)
        for i, seg in enumerate(segments)
        if _is_bathroom(segments, i, config)
    ]


def infer_outings(segments: Sequence[Segment], config: MonitoringConfig | None = None) -> list:
    """No-activity periods longer than ``outing_min`` that are not bathroom visits."""
    config = config or MonitoringConfig()
    return [
        Outing(to_local(seg.start, config.tz_offset_min), seg.duration_min)
        for i, seg in enumerate(segments)
        if seg.label == ActivityClass.NO_ACTIVITY
        and seg.duration_min > config.outing_min
        and not _is_bathroom(segments, i, config)
    ]


def sleep_onsets(segments: Sequence[Segment], config: MonitoringConfig | None = None) -> SleepReport:
    """Sleep onset per local day and the night-owl flag.

    The onset for day D is the first sleeping segment of at least
    ``onset_min_sleep`` minutes starting between 20:00 on D-1 and 12:00 on D.
    Onsets are expressed as minutes relative to midnight of D (negative
    before midnight).
    """
    config = config or MonitoringConfig()
    tz = config.tz_offset_min
    win_lo = parse_clock(ONSET_WINDOW[0]) - 24 * 60
    win_hi = parse_clock(ONSET_WINDOW[1])
    sleeps = [s for s in segments if s.label == ActivityClass.SLEEPING and s.duration_min >= config.onset_min_sleep]
    onsets = {}
    for day in covered_days(segments, tz):
        midnight = _local_midnight_ts(day, tz)
        onsets[day] = None
        for s in sleeps:
            rel = (s.start - midnight) / 60.0
            if win_lo <= rel < win_hi:
                onsets[day] = to_local(s.start, tz)
                break
    rel = {d: (t - datetime(d.year, d.month, d.day)).total_seconds() / 60.0 for d, t in onsets.items() if t}
    med = median(rel.values()) if rel else None
    cutoff = parse_clock(config.night_owl_cutoff)
    late = parse_clock(config.late_onset)
    return SleepReport(
        onsets=onsets,
        night_owl=med is not None and med > cutoff,
        median_onset_min=med,
        late_days=[d for d, m in rel.items() if m > late],
    )


def _centered_nanmedian(x: np.ndarray, window: int) -> np.ndarray:
    if window <= 1 or x.size == 0:
        return x.copy()
    half = window // 2
    padded = np.concatenate([np.full(half, np.nan), x, np.full(half, np.nan)])
    view = np.lib.stride_tricks.sliding_window_view(padded, window)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        out = np.nanmedian(view, axis=1)
    return np.where(np.isnan(x), np.nan, out)


def temperature_report(arrays: dict, timeline: ActivityTimeline, config: MonitoringConfig | None = None) -> TemperatureReport:
    """Average occupied temperature, sleeping/daily gap and temperature drops.

    A drop is a run of occupied samples at least ``anomaly_min`` minutes long
    whose temperature sits more than ``anomaly_delta`` below the period
    median of its own class (after a centered median over the smoothing
    window).
    """
    config = config or MonitoringConfig()
    labels = timeline.labels
    occ = occupied_temperatures(arrays, labels)
    period_avg = person_avg_temperature(arrays, labels)

    days = np.array([to_local(ts, config.tz_offset_min).date() for ts in timeline.timestamps])
    gaps = {}
    for day in dict.fromkeys(days.tolist()):
        sel = days == day
        means = []
        for cls in OCCUPIED:
            v = occ[sel & (labels == cls)]
            v = v[~np.isnan(v)]
            means.append(v.mean() if v.size else np.nan)
        if not np.isnan(means).any():
            gaps[day] = float(abs(means[0] - means[1]))
    mean_gap = float(np.mean(list(gaps.values()))) if gaps else float("nan")

    deviation = np.full(occ.shape, np.nan)
    for cls in OCCUPIED:
        sel = (labels == cls) & ~np.isnan(occ)
        if sel.any():
            deviation[sel] = np.median(occ[sel]) - occ[sel]
    deviation = _centered_nanmedian(deviation, config.smoothing_window)
    with np.errstate(invalid="ignore"):
        flagged = deviation > config.anomaly_delta
    anomalies = []
    min_len = config.anomaly_min * 60 / timeline.period
    for s, n, v in zip(*run_lengths(flagged)):
        if v and n >= min_len:
            anomalies.append(
                Anomaly(
                    to_local(timeline.start + int(s) * timeline.period, config.tz_offset_min),
                    int(n) * timeline.period / 60.0,
                    float(np.nanmax(deviation[s : s + n])),
                )
            )
    return TemperatureReport(float(period_avg), mean_gap, gaps, anomalies)


# -- report emitters ----------------------------------------------------------


def write_table1_csv(path, summaries: Sequence[DailySummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date"] + [label.slug for label in LABEL_ORDER])
        for s in summaries:
            w.writerow([s.date.isoformat()] + [f"{s.hours(label):g}" for label in LABEL_ORDER])


def read_table1_csv(path) -> list:
    with open(path, newline="") as fh:
        return [
            DailySummary(
                date.fromisoformat(r["date"]),
                *(float(r[label.slug]) for label in LABEL_ORDER),
            )
            for r in csv.DictReader(fh)
        ]


def write_table2_csv(path, stats: PeriodStats) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["activity", "mean_hours", "percentage"])
        for label in LABEL_ORDER:
            st = stats.by_label[label]
            w.writerow([DISPLAY[label], f"{st.mean_hours:.6f}", f"{st.fraction:.9f}"])


def write_table3_csv(path, visits: Sequence[BathroomVisit]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "start", "duration_min"])
        for v in visits:
            w.writerow([v.start.date().isoformat(), v.start.strftime("%H:%M"), f"{v.duration_min:g}"])


def _clock(minutes: float) -> str:
    m = int(round(minutes)) % (24 * 60)
    return f"{m // 60:02d}:{m % 60:02d}"


def findings_text(
    summaries: Sequence[DailySummary],
    stats: PeriodStats | None,
    visits: Sequence[BathroomVisit],
    outings: Sequence[Outing],
    sleep: SleepReport,
    temps: TemperatureReport | None,
) -> str:
    lines = [f"days monitored: {len(summaries)}"]
    if stats is not None:
        ranked = sorted(
            (l for l in LABEL_ORDER if l != ActivityClass.MISSING),
            key=lambda l: -stats.by_label[l].mean_hours,
        )
        lines.append("dominant activity: " + ", ".join(
            f"{l.slug} {stats.by_label[l].mean_hours:.2f} h/day ({stats.by_label[l].fraction:.1%})" for l in ranked
        ))
        lines.append(f"missing data: {stats.by_label[ActivityClass.MISSING].fraction:.1%}")
    lines.append(f"bathroom visits: {len(visits)}")
    if visits:
        durations = [v.duration_min for v in visits]
        lines.append(f"bathroom visit duration: {min(durations):g}-{max(durations):g} min")
    lines.append(f"outings: {len(outings)}")
    for o in outings:
        lines.append(f"  outing {o.start:%Y-%m-%d %H:%M} for {o.duration_min:g} min")
    if sleep.median_onset_min is None:
        lines.append("sleep onset: none detected")
    else:
        lines.append(f"median sleep onset: {_clock(sleep.median_onset_min)}")
    lines.append(f"night owl: {'yes' if sleep.night_owl else 'no'}")
    if sleep.late_days:
        lines.append("late onsets: " + ", ".join(d.isoformat() for d in sleep.late_days))
    if temps is not None:
        lines.append(f"average occupied temperature: {temps.period_avg:.2f} C")
        lines.append(f"mean sleeping/daily gap: {temps.mean_gap:.2f} C")
        lines.append(f"temperature drops: {len(temps.anomalies)}")
        for a in temps.anomalies:
            lines.append(f"  drop {a.start:%Y-%m-%d %H:%M} for {a.duration_min:g} min (max {a.max_drop:.1f} C)")
    return "\n".join(lines) + "\n"


def plot_days(arrays: dict, timeline: ActivityTimeline, out_dir, tz_offset_min: int = 0) -> list:
    """One PNG per local day with the sleeping and daily series (needs matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    local = [to_local(ts, tz_offset_min) for ts in timeline.timestamps]
    days = np.array([t.date() for t in local])
    hours = np.array([t.hour + t.minute / 60 for t in local])
    paths = []
    for day in dict.fromkeys(days.tolist()):
        sel = days == day
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(hours[sel], arrays[ActivityClass.SLEEPING].values[sel], color="tab:orange", label="sleeping")
        ax.plot(hours[sel], arrays[ActivityClass.DAILY].values[sel], color="tab:blue", label="daily")
        ax.set_xlim(0, 24)
        ax.set_xlabel("hour")
        ax.set_ylabel("temperature (C)")
        ax.set_title(day.isoformat())
        ax.legend(loc="upper right")
        path = out_dir / f"{day.isoformat()}.png"
        fig.savefig(path, dpi=80, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    return paths
