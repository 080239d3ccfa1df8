from datetime import date, datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermadl.analytics import (
    DailySummary,
    EmptyInput,
    aggregate_stats,
    daily_summaries,
    daily_summary,
    findings_text,
    infer_bathroom_visits,
    infer_outings,
    read_table1_csv,
    sleep_onsets,
    temperature_report,
    write_table1_csv,
    write_table2_csv,
    write_table3_csv,
)
from thermadl.classification import ActivityTimeline, Segment, expand, segment
from thermadl.model import ActivityArray, ActivityClass, MonitoringConfig, to_timestamp

M, S, D, N = ActivityClass.MISSING, ActivityClass.SLEEPING, ActivityClass.DAILY, ActivityClass.NO_ACTIVITY
DAY = date(2021, 4, 7)


def segs(start: str, *parts):
    """Contiguous segments from (label, minutes) pairs starting at local 'YYYY-MM-DD HH:MM'."""
    t = to_timestamp(datetime.fromisoformat(start))
    out = []
    for label, minutes in parts:
        out.append(Segment(label, t, float(minutes)))
        t += minutes * 60
    return out


def test_summary_of_a_listed_day():
    day = segs("2021-04-07 00:00", (S, 7 * 60), (D, 5 * 60), (N, 60), (D, 6.5 * 60), (S, 4.5 * 60))
    s = daily_summary(day, DAY)
    assert (s.daily, s.sleeping, s.no_activity, s.missing) == (11.5, 11.5, 1.0, 0.0)


def test_all_missing_day():
    s = daily_summary([], DAY)
    assert s.missing == 24.0 and s.total == 24.0


def test_thirds():
    s = daily_summary(segs("2021-04-07 00:00", (S, 480), (D, 480), (N, 480)), DAY)
    assert (s.sleeping, s.daily, s.no_activity, s.missing) == (8.0, 8.0, 8.0, 0.0)


def test_segments_crossing_midnight_are_split():
    two = segs("2021-04-06 22:00", (S, 9 * 60), (D, 15 * 60))
    s6, s7 = daily_summary(two, date(2021, 4, 6)), daily_summary(two, DAY)
    assert s6.sleeping == 2.0 and s6.missing == 22.0
    assert s7.sleeping == 7.0 and s7.daily == 15.0 and s7.missing == 2.0


def test_timezone_offset_shifts_the_day():
    # a UTC day of sleep seen from UTC+2 straddles two local days
    whole = segs("2021-04-07 00:00", (S, 1440))
    s = daily_summary(whole, DAY, tz_offset_min=120)
    assert s.sleeping == 22.0


labels = st.sampled_from([M, S, D, N])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(labels, st.integers(1, 600)), min_size=1, max_size=30))
def test_hours_always_sum_to_24(parts):
    for s in daily_summaries(segs("2021-04-07 05:00", *parts)):
        assert s.total == pytest.approx(24.0, abs=1e-9)
        assert min(s.daily, s.sleeping, s.no_activity, s.missing) >= 0


def table1():
    from importlib import resources

    return read_table1_csv(resources.files("thermadl.data").joinpath("table1.csv"))


def test_table2_from_table1_rows():
    stats = aggregate_stats(table1())
    assert stats.days == 11
    want = {D: 7.090909, S: 9.090909, N: 4.272727, M: 3.545455}
    for label, hours in want.items():
        assert stats[label].mean_hours == pytest.approx(hours, abs=1e-6)
        assert stats[label].fraction == pytest.approx(hours / 24, abs=1e-6)
    assert sum(stats[l].fraction for l in (M, S, D, N)) == pytest.approx(1.0)


def test_aggregate_of_pure_sleep():
    stats = aggregate_stats([DailySummary(DAY, 0, 24, 0, 0)])
    assert stats[S].mean_hours == 24.0 and stats[S].fraction == 1.0


def test_aggregate_empty():
    with pytest.raises(EmptyInput):
        aggregate_stats([])


def test_night_bathroom_visit():
    night = segs("2021-04-07 22:00", (S, 180), (N, 30), (S, 330))
    visits = infer_bathroom_visits(night)
    assert [(v.start, v.duration_min) for v in visits] == [(datetime(2021, 4, 8, 1, 0), 30.0)]
    assert infer_outings(night) == []


def test_long_gap_is_not_a_visit():
    night = segs("2021-04-07 22:00", (S, 180), (N, 120), (S, 300))
    assert infer_bathroom_visits(night) == []
    assert [(o.start, o.duration_min) for o in infer_outings(night)] == [(datetime(2021, 4, 8, 1, 0), 120.0)]


def test_visit_needs_long_neighbours():
    short = segs("2021-04-07 10:00", (D, 30), (N, 20), (D, 120))
    assert infer_bathroom_visits(short) == []


def test_visit_bound_is_inclusive():
    at_max = segs("2021-04-07 20:00", (D, 60), (N, 90), (S, 60))
    assert len(infer_bathroom_visits(at_max)) == 1
    assert infer_outings(at_max) == []


def test_missing_neighbour_blocks_visit():
    gap = segs("2021-04-07 20:00", (M, 120), (N, 30), (S, 120))
    assert infer_bathroom_visits(gap) == []


def test_ten_hour_outing():
    day = segs("2021-04-07 00:00", (S, 420), (D, 180), (N, 600), (D, 240))
    assert [(o.start, o.duration_min) for o in infer_outings(day)] == [(datetime(2021, 4, 7, 10, 0), 600.0)]


def test_short_absence_is_not_an_outing():
    day = segs("2021-04-07 00:00", (D, 45), (N, 45), (M, 60))
    assert infer_outings(day) == []


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(labels, st.integers(1, 300)), min_size=1, max_size=40))
def test_visits_and_outings_are_disjoint(parts):
    tl = expand(segs("2021-04-07 00:00", *parts))
    s = segment(tl)
    starts_v = {v.start for v in infer_bathroom_visits(s)}
    starts_o = {o.start for o in infer_outings(s)}
    assert not (starts_v & starts_o)


def test_early_sleeper_is_not_a_night_owl():
    nights = []
    for d in range(5):
        nights += segs(f"2021-04-{7 + d:02d} 12:00", (D, 600), (S, 540), (D, 300))
    rep = sleep_onsets(nights)
    assert rep.night_owl is False
    assert rep.median_onset_min == pytest.approx(-120.0)
    assert all(t is None or t.hour == 22 for t in rep.onsets.values())


def test_late_sleeper():
    nights = segs("2021-04-07 12:00", (D, 930), (S, 360), (D, 150))
    rep = sleep_onsets(nights)
    assert rep.night_owl is True
    assert rep.late_days == [date(2021, 4, 8)]
    assert rep.onsets[date(2021, 4, 8)] == datetime(2021, 4, 8, 3, 30)


def test_naps_do_not_count_as_onset():
    day = segs("2021-04-07 00:00", (D, 60), (S, 60), (D, 60), (S, 300), (D, 960))
    assert sleep_onsets(day).onsets[DAY] == datetime(2021, 4, 7, 3, 0)


def _temperature_fixture(dip_offset=0.0):
    """Four days: sleep 23:00-07:00 at 30.5, daily otherwise at 33.5, light noise."""
    start = to_timestamp(datetime(2021, 4, 7))
    n = 4 * 1440
    minute = np.arange(n) % 1440
    sleeping = (minute >= 23 * 60) | (minute < 7 * 60)
    rng = np.random.default_rng(5)
    a1 = np.where(sleeping, 30.5, 22.0) + rng.normal(0, 0.2, n)
    a2 = np.where(sleeping, 22.0, 33.5) + rng.normal(0, 0.2, n)
    dip = slice(2 * 1440 + 2 * 60, 2 * 1440 + 4 * 60)  # day 3, 02:00-04:00
    a1[dip] -= dip_offset
    a3 = np.full(n, 22.0)
    arrays = {c: ActivityArray(c, start, 60, v) for c, v in zip((S, D, N), (a1, a2, a3))}
    timeline = ActivityTimeline(start, 60, np.where(sleeping, int(S), int(D)))
    return arrays, timeline


def test_constant_temperatures_have_no_anomaly():
    arrays, tl = _temperature_fixture()
    rep = temperature_report(arrays, tl)
    assert rep.anomalies == []
    assert rep.period_avg == pytest.approx((8 * 30.5 + 16 * 33.5) / 24, abs=0.02)
    assert rep.mean_gap == pytest.approx(3.0, abs=0.05)


def test_injected_dip_is_one_anomaly():
    arrays, tl = _temperature_fixture(dip_offset=3.0)
    rep = temperature_report(arrays, tl)
    assert len(rep.anomalies) == 1
    a = rep.anomalies[0]
    w = MonitoringConfig().smoothing_window
    assert abs((a.start - datetime(2021, 4, 9, 2, 0)).total_seconds()) <= w * 60
    assert abs(a.duration_min - 120) <= w
    assert a.max_drop == pytest.approx(3.0, abs=0.3)


def test_short_dip_is_ignored():
    arrays, tl = _temperature_fixture()
    a1 = arrays[S].values.copy()
    a1[2 * 1440 + 120 : 2 * 1440 + 140] -= 3.0
    arrays[S] = ActivityArray(S, arrays[S].start, 60, a1)
    assert temperature_report(arrays, tl).anomalies == []


def test_report_emitters(tmp_path):
    summaries = table1()
    write_table1_csv(tmp_path / "t1.csv", summaries)
    assert read_table1_csv(tmp_path / "t1.csv") == summaries
    write_table2_csv(tmp_path / "t2.csv", aggregate_stats(summaries))
    lines = (tmp_path / "t2.csv").read_text().splitlines()
    assert lines[0] == "activity,mean_hours,percentage"
    assert lines[1].split(",")[1] == "7.090909"
    night = segs("2021-04-07 22:00", (S, 180), (N, 30), (S, 330))
    visits = infer_bathroom_visits(night)
    write_table3_csv(tmp_path / "t3.csv", visits)
    assert (tmp_path / "t3.csv").read_text().splitlines()[1] == "2021-04-08,01:00,30"
    text = findings_text(summaries, aggregate_stats(summaries), visits, [], sleep_onsets(night), None)
    assert "bathroom visits: 1" in text and "night owl:" in text


def test_plots(tmp_path):
    pytest.importorskip("matplotlib")
    from thermadl.analytics import plot_days

    arrays, tl = _temperature_fixture()
    paths = plot_days(arrays, tl, tmp_path)
    assert len(paths) == 4 and all(p.stat().st_size > 0 for p in paths)
