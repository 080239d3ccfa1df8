"""End-to-end wiring: frames -> activity arrays -> timeline -> reports."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import analytics
from .classification import ActivityTimeline, classify_arrays, segment, write_segments_csv, write_timeline_csv
from .model import MonitoringConfig, ThermalFrame, mean_frame
from .simulator import Scenario, reference_frames
from .tracking import RoiMap, build_activity_arrays, calibrate_roi, write_arrays_csv


@dataclass
class Analysis:
    timeline: ActivityTimeline
    segments: list
    summaries: list
    stats: analytics.PeriodStats | None
    visits: list
    outings: list
    sleep: analytics.SleepReport
    arrays: dict | None = None
    temperatures: analytics.TemperatureReport | None = None

    @property
    def findings(self) -> str:
        return analytics.findings_text(
            self.summaries, self.stats, self.visits, self.outings, self.sleep, self.temperatures
        )


def calibrate_scenario(scenario: Scenario, config: MonitoringConfig | None = None, n_refs: int = 30) -> RoiMap:
    """Calibrate one region per scene location from averaged reference captures."""
    config = config or MonitoringConfig()
    rois = RoiMap()
    for name, loc in scenario.scene.locations.items():
        ref = mean_frame(reference_frames(scenario.scene, name, n_refs))
        rois = rois.add(calibrate_roi(ref, scenario.scene.ambient, config.roi_delta, loc.cls, name, rois))
    return rois.check_coverage()


def analyze_timeline(timeline: ActivityTimeline, config: MonitoringConfig | None = None, arrays=None) -> Analysis:
    config = config or MonitoringConfig()
    segs = segment(timeline)
    summaries = analytics.daily_summaries(segs, config.tz_offset_min)
    temps = None
    if arrays is not None:
        try:
            temps = analytics.temperature_report(arrays, timeline, config)
        except ValueError:
            temps = None
    return Analysis(
        timeline=timeline,
        segments=segs,
        summaries=summaries,
        stats=analytics.aggregate_stats(summaries) if summaries else None,
        visits=analytics.infer_bathroom_visits(segs, config),
        outings=analytics.infer_outings(segs, config),
        sleep=analytics.sleep_onsets(segs, config),
        arrays=arrays,
        temperatures=temps,
    )


def analyze_frames(frames: Sequence[ThermalFrame], rois: RoiMap, config: MonitoringConfig | None = None) -> Analysis:
    config = config or MonitoringConfig()
    arrays = build_activity_arrays(frames, rois, config.period, config.reducer)
    timeline = classify_arrays(arrays, config)
    return analyze_timeline(timeline, config, arrays)


def write_reports(result: Analysis, out_dir, plots: bool = False, tz_offset_min: int = 0) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / n for n in ("table1.csv", "table2.csv", "table3.csv", "timeline.csv", "segments.csv", "findings.txt")]
    analytics.write_table1_csv(written[0], result.summaries)
    if result.stats is not None:
        analytics.write_table2_csv(written[1], result.stats)
    else:
        written[1].write_text("activity,mean_hours,percentage\n")
    analytics.write_table3_csv(written[2], result.visits)
    write_timeline_csv(written[3], result.timeline)
    write_segments_csv(written[4], result.segments)
    written[5].write_text(result.findings)
    if result.arrays is not None:
        write_arrays_csv(out / "activity_arrays.csv", result.arrays)
        written.append(out / "activity_arrays.csv")
        if plots:
            written += analytics.plot_days(result.arrays, result.timeline, out / "plots", tz_offset_min)
    return written
