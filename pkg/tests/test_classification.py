import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from conftest import T0
from thermadl.classification import (
    ActivityClassifier,
    ActivityTimeline,
    Segment,
    ambient_baseline,
    classify_arrays,
    classify_matrix,
    classify_sample,
    expand,
    read_timeline_csv,
    segment,
    smooth,
    write_timeline_csv,
)
from thermadl.model import ActivityArray, ActivityClass, MonitoringConfig

M, S, D, N = (int(c) for c in ActivityClass)
nan = math.nan


@pytest.mark.parametrize(
    "a1,a2,want",
    [
        (30.0, 22.0, ActivityClass.SLEEPING),
        (22.0, 30.0, ActivityClass.DAILY),
        (22.0, 22.0, ActivityClass.NO_ACTIVITY),
        (nan, nan, ActivityClass.MISSING),
        (None, None, ActivityClass.MISSING),
        (30.0, 30.0, ActivityClass.SLEEPING),
        (29.0, 31.0, ActivityClass.DAILY),
        (24.0, 22.0, ActivityClass.SLEEPING),
        (23.99, 22.0, ActivityClass.NO_ACTIVITY),
        (nan, 30.0, ActivityClass.DAILY),
    ],
)
def test_classify_examples(a1, a2, want):
    assert classify_sample(a1, a2, 22.0, 2.0) is want


def rule(a1, a2, amb, delta):
    """Independent statement of the labelling rule."""
    if math.isnan(a1) and math.isnan(a2):
        return M
    occ = {S: a1 if a1 >= amb + delta else None, D: a2 if a2 >= amb + delta else None}
    occ = {k: v for k, v in occ.items() if v is not None}
    if not occ:
        return N
    return S if S in occ and (D not in occ or occ[S] >= occ[D]) else D


vals = st.one_of(st.just(nan), st.floats(10, 40))


@settings(max_examples=300, deadline=None)
@given(vals, vals, st.floats(15, 30), st.floats(0.1, 5))
def test_matrix_matches_rule(a1, a2, amb, delta):
    got = classify_matrix(np.array([[a1, a2, amb]]), amb, delta)[0]
    assert got == rule(a1, a2, amb, delta)
    assert got == classify_sample(a1, a2, amb, delta)


@settings(max_examples=200, deadline=None)
@given(st.floats(10, 40), st.floats(10, 40), st.floats(15, 30), st.floats(0.5, 5), st.sampled_from([0.5, 2.0, 4.0]))
def test_scaling_all_temperatures_about_zero_with_delta(a1, a2, amb, delta, k):
    assert classify_sample(a1, a2, amb, delta) == classify_sample(k * a1, k * a2, k * amb, k * delta)


def test_smooth_removes_isolated_blip():
    assert smooth([S, S, D, S, S], 5).tolist() == [S, S, S, S, S]


def test_smooth_keeps_real_transition():
    labels = [S] * 6 + [D] * 6
    assert smooth(labels, 5).tolist() == labels


def test_smooth_never_touches_missing():
    labels = [S, S, M, S, S, M, M, D, S]
    out = smooth(labels, 5)
    assert [i for i, v in enumerate(out) if v == M] == [2, 5, 6]


def test_smooth_missing_does_not_vote():
    # one D amid missing: S has 2 votes in window of D at index 2, D has 1
    assert smooth([S, S, D, M, M], 5)[2] == S
    assert smooth([M, M, D, M, M], 5)[2] == D


def test_smooth_window_one_is_identity():
    labels = [S, D, N, M, S]
    assert smooth(labels, 1).tolist() == labels


def test_smooth_rejects_even_window():
    with pytest.raises(ValueError):
        smooth([S], 4)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([M, S, D, N]), max_size=200), st.sampled_from([1, 3, 5, 7]))
def test_smooth_properties(labels, w):
    out = smooth(labels, w)
    assert len(out) == len(labels)
    lab = np.array(labels, dtype=int)
    assert np.array_equal(out == M, lab == M)
    if len(set(labels) - {M}) <= 1:
        assert np.array_equal(out, lab)


def test_segments_of_a_simple_timeline():
    tl = ActivityTimeline(T0, 60, [S] * 3 + [D] * 2 + [M])
    segs = segment(tl)
    assert [(s.label, s.start, s.duration_min) for s in segs] == [
        (ActivityClass.SLEEPING, T0, 3.0),
        (ActivityClass.DAILY, T0 + 180, 2.0),
        (ActivityClass.MISSING, T0 + 300, 1.0),
    ]
    assert segs[0].end == segs[1].start


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([M, S, D, N]), min_size=1, max_size=300), st.sampled_from([1, 60, 300]))
def test_segment_expand_roundtrip(labels, period):
    tl = ActivityTimeline(T0, period, labels)
    segs = segment(tl)
    assert expand(segs, period) == tl
    assert all(a.label != b.label for a, b in zip(segs, segs[1:]))
    assert sum(s.duration_min for s in segs) == pytest.approx(len(labels) * period / 60)


def test_expand_rejects_gaps():
    with pytest.raises(ValueError):
        expand([Segment(ActivityClass.SLEEPING, T0, 1.0), Segment(ActivityClass.DAILY, T0 + 120, 1.0)])


def test_ambient_baseline_tracks_background():
    bg = np.array([nan, 21.0, 21.0, 25.0, 25.0, 25.0])
    base = ambient_baseline(bg, 3, 22.0)
    assert base[0] == 22.0
    assert base[1] == 21.0
    assert base[-1] == 25.0


def test_classifier_estimator_contract():
    X = np.array([[30, 22, 22], [22, 30, 22], [22, 22, 22], [nan, nan, nan]], dtype=float)
    clf = ActivityClassifier(smoothing_window=1)
    assert clf.fit(X).predict(X).tolist() == [S, D, N, M]
    assert list(clf.classes_) == [M, S, D, N]
    c = clone(clf).set_params(activation_delta=10.0)
    assert c.fit(X).predict(X).tolist() == [N, N, N, M]
    with pytest.raises(ValueError):
        ActivityClassifier(smoothing_window=2).fit(X)


def test_ambient_drift_raises_threshold():
    # background warms to 27; a bed at 28 is no longer occupied
    X = np.column_stack([np.full(80, 28.0), np.full(80, 22.0), np.full(80, 27.0)])
    labels = ActivityClassifier(ambient_window=60, smoothing_window=1).fit(X).predict(X)
    assert set(labels.tolist()) == {N}


def test_classify_arrays_uses_config():
    n = 10
    arrays = {
        ActivityClass.SLEEPING: ActivityArray(ActivityClass.SLEEPING, T0, 60, np.full(n, 25.0)),
        ActivityClass.DAILY: ActivityArray(ActivityClass.DAILY, T0, 60, np.full(n, 22.0)),
        ActivityClass.NO_ACTIVITY: ActivityArray(ActivityClass.NO_ACTIVITY, T0, 60, np.full(n, 22.0)),
    }
    assert set(classify_arrays(arrays).labels.tolist()) == {S}
    tl = classify_arrays(arrays, MonitoringConfig(activation_delta=4.0))
    assert set(tl.labels.tolist()) == {N}
    assert tl.start == T0 and tl.period == 60


def test_timeline_csv_roundtrip(tmp_path):
    tl = ActivityTimeline(T0, 60, [S, S, D, N, M])
    write_timeline_csv(tmp_path / "t.csv", tl)
    assert read_timeline_csv(tmp_path / "t.csv") == tl
