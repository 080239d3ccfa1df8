"""Per-sample activity labels, label smoothing and run-length segments."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_activity_matrix
from .model import DEFAULT_PERIOD, ActivityClass, MonitoringConfig, format_timestamp, to_timestamp
from .tracking import stack_arrays

MISSING = int(ActivityClass.MISSING)
SLEEPING = int(ActivityClass.SLEEPING)
DAILY = int(ActivityClass.DAILY)
NO_ACTIVITY = int(ActivityClass.NO_ACTIVITY)
N_LABELS = 4


@dataclass(frozen=True, eq=False)
class ActivityTimeline:
    start: int
    period: int
    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int8)
        if labels.size and (labels.min() < 0 or labels.max() >= N_LABELS):
            raise ValueError("labels must be ActivityClass values")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, ActivityTimeline):
            return NotImplemented
        return (self.start, self.period) == (other.start, other.period) and np.array_equal(
            self.labels, other.labels
        )

    @property
    def end(self) -> int:
        return self.start + self.period * len(self.labels)

    @property
    def timestamps(self) -> np.ndarray:
        return self.start + self.period * np.arange(len(self.labels), dtype=np.int64)


@dataclass(frozen=True)
class Segment:
    label: ActivityClass
    start: int
    duration_min: float

    @property
    def end(self) -> int:
        return self.start + round(self.duration_min * 60)


def classify_sample(a1: float | None, a2: float | None, ambient: float, delta: float = 2.0) -> ActivityClass:
    """Label one grid slot from the sleeping and daily region temperatures.

    A region is occupied when it reaches ``ambient + delta``; with both
    occupied the warmer wins and ties go to sleeping.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    a1 = math.nan if a1 is None else a1
    a2 = math.nan if a2 is None else a2
    if math.isnan(a1) and math.isnan(a2):
        return ActivityClass.MISSING
    threshold = ambient + delta
    on1 = not math.isnan(a1) and a1 >= threshold
    on2 = not math.isnan(a2) and a2 >= threshold
    if on1 and on2:
        return ActivityClass.SLEEPING if a1 >= a2 else ActivityClass.DAILY
    if on1:
        return ActivityClass.SLEEPING
    if on2:
        return ActivityClass.DAILY
    return ActivityClass.NO_ACTIVITY


def classify_matrix(X: np.ndarray, ambient, delta: float = 2.0) -> np.ndarray:
    """Vectorised :func:`classify_sample` over (n, 3) rows; ``ambient`` may be per-row."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    X = np.asarray(X, dtype=np.float64)
    a1, a2 = X[:, 0], X[:, 1]
    threshold = np.asarray(ambient, dtype=np.float64) + delta
    with np.errstate(invalid="ignore"):
        on1 = a1 >= threshold
        on2 = a2 >= threshold
        sleep_wins = np.nan_to_num(a1, nan=-np.inf) >= np.nan_to_num(a2, nan=-np.inf)
    labels = np.full(len(X), NO_ACTIVITY, dtype=np.int8)
    labels[on2] = DAILY
    labels[on1 & (~on2 | sleep_wins)] = SLEEPING
    labels[np.isnan(a1) & np.isnan(a2)] = MISSING
    return labels


def ambient_baseline(background: np.ndarray, window: int, fallback: float) -> np.ndarray:
    """Trailing median of the background series over ``window`` samples.

    Slots whose window holds no background value get ``fallback``.
    """
    bg = np.asarray(background, dtype=np.float64)
    if bg.size == 0:
        return bg.copy()
    window = max(int(window), 1)
    padded = np.concatenate([np.full(window - 1, np.nan), bg])
    view = np.lib.stride_tricks.sliding_window_view(padded, window)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        med = np.nanmedian(view, axis=1)
    return np.where(np.isnan(med), fallback, med)


def smooth(labels: Sequence[int], window: int = 5) -> np.ndarray:
    """Sliding majority vote over ``window`` samples.

    Missing slots neither vote nor change. A label keeps its value unless one
    other label strictly outvotes every competitor.
    """
    labels = np.asarray(labels, dtype=np.int8)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be an odd count >= 1")
    if window == 1 or labels.size == 0:
        return labels.copy()
    half = window // 2
    onehot = np.zeros((labels.size, N_LABELS))
    onehot[np.arange(labels.size), labels] = 1.0
    onehot[:, MISSING] = 0.0
    kernel = np.ones(window)
    votes = np.column_stack(
        [np.convolve(onehot[:, k], kernel, mode="full")[half : half + labels.size] for k in range(N_LABELS)]
    )
    top = votes.max(axis=1)
    winners = (votes == top[:, None]).sum(axis=1)
    best = votes.argmax(axis=1).astype(np.int8)
    out = np.where(winners == 1, best, labels).astype(np.int8)
    out[labels == MISSING] = MISSING
    return out


def run_lengths(labels: np.ndarray):
    """(starts, lengths, values) of the maximal runs in ``labels``."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return np.array([], dtype=int), np.array([], dtype=int), labels[:0]
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate([[0], change])
    lengths = np.diff(np.concatenate([starts, [labels.size]]))
    return starts, lengths, labels[starts]


def segment(timeline: ActivityTimeline) -> list:
    starts, lengths, values = run_lengths(timeline.labels)
    return [
        Segment(ActivityClass(int(v)), timeline.start + int(s) * timeline.period, int(n) * timeline.period / 60.0)
        for s, n, v in zip(starts, lengths, values)
    ]


def expand(segments: Sequence[Segment], period: int = DEFAULT_PERIOD) -> ActivityTimeline:
    """Inverse of :func:`segment` for segments tiling a regular grid."""
    if not segments:
        return ActivityTimeline(0, period, [])
    parts = []
    cursor = segments[0].start
    for seg in segments:
        if seg.start != cursor:
            raise ValueError("segments must be contiguous")
        n = round(seg.duration_min * 60 / period)
        parts.append(np.full(n, int(seg.label), dtype=np.int8))
        cursor += n * period
    return ActivityTimeline(segments[0].start, period, np.concatenate(parts))


def classify_arrays(arrays: dict, config: MonitoringConfig | None = None) -> ActivityTimeline:
    """Activity arrays -> smoothed timeline using the config's thresholds."""
    config = config or MonitoringConfig()
    X = stack_arrays(arrays)
    ref = arrays[ActivityClass.SLEEPING]
    clf = ActivityClassifier(
        activation_delta=config.activation_delta,
        ambient=config.ambient_baseline,
        ambient_window=max(1, round(config.ambient_window_min * 60 / ref.period)),
        smoothing_window=config.smoothing_window,
    )
    return ActivityTimeline(ref.start, ref.period, clf.fit(X).predict(X))


class ActivityClassifier(ClassifierMixin, BaseEstimator):
    """Threshold classifier over (a1, a2, a3) rows sampled on a regular grid.

    Rows must be in time order: the ambient baseline is a trailing median of
    the background column a3, falling back to ``ambient``. Predictions are
    ActivityClass integer codes, smoothed by majority vote.
    """

    def __init__(self, activation_delta=2.0, ambient=22.0, ambient_window=60, smoothing_window=5):
        self.activation_delta = activation_delta
        self.ambient = ambient
        self.ambient_window = ambient_window
        self.smoothing_window = smoothing_window

    def fit(self, X, y=None):
        if self.activation_delta <= 0:
            raise ValueError("activation_delta must be positive")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be an odd count >= 1")
        check_activity_matrix(X)
        self.classes_ = np.array([MISSING, SLEEPING, DAILY, NO_ACTIVITY])
        self.n_features_in_ = 3
        return self

    def ambient_for(self, X) -> np.ndarray:
        X = check_activity_matrix(X)
        return ambient_baseline(X[:, 2], self.ambient_window, self.ambient)

    def predict_raw(self, X) -> np.ndarray:
        check_is_fitted(self, "classes_")
        X = check_activity_matrix(X)
        return classify_matrix(X, self.ambient_for(X), self.activation_delta)

    def predict(self, X) -> np.ndarray:
        return smooth(self.predict_raw(X), self.smoothing_window)


# -- CSV --------------------------------------------------------------------


def write_timeline_csv(path, timeline: ActivityTimeline) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "label"])
        for ts, lab in zip(timeline.timestamps, timeline.labels):
            w.writerow([format_timestamp(ts), ActivityClass(int(lab)).slug])


def read_timeline_csv(path) -> ActivityTimeline:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return ActivityTimeline(0, DEFAULT_PERIOD, [])
    ts = np.array([to_timestamp(r["timestamp"]) for r in rows], dtype=np.int64)
    period = int(ts[1] - ts[0]) if ts.size > 1 else DEFAULT_PERIOD
    if period <= 0 or np.any(np.diff(ts) != period):
        raise ValueError(f"{path}: timeline is not on a regular grid")
    labels = [int(ActivityClass.parse(r["label"])) for r in rows]
    return ActivityTimeline(int(ts[0]), period, labels)


def write_segments_csv(path, segments: Sequence[Segment]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "start", "duration_min"])
        for s in segments:
            w.writerow([s.label.slug, format_timestamp(s.start), f"{s.duration_min:g}"])
