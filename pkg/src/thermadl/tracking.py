"""Region-of-interest calibration and per-class activity arrays.

Each monitored class owns one or more regions of the sensor grid (bed for
sleeping, work and dining tables for daily activity). Tracking those pixels
over time gives one temperature series per class; everything outside the
regions forms the background series used for the no-activity class.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_frames_array
from .model import (
    DEFAULT_PERIOD,
    N_PIXELS,
    ActivityArray,
    ActivityClass,
    RegionOfInterest,
    ThermalFrame,
    format_timestamp,
    mean_frame,
)

TRACKED = (ActivityClass.SLEEPING, ActivityClass.DAILY, ActivityClass.NO_ACTIVITY)


class EmptyRoi(ValueError):
    pass


class OverlapError(ValueError):
    pass


class EmptyStream(ValueError):
    pass


class NoOccupiedSamples(ValueError):
    pass


@dataclass(frozen=True)
class RoiMap:
    entries: tuple = ()

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        seen: dict = {}
        for roi in entries:
            for px in roi.pixels:
                if px in seen:
                    raise OverlapError(f"pixel {px} is in both {seen[px]!r} and {roi.label!r}")
                seen[px] = roi.label

    def add(self, roi: RegionOfInterest) -> "RoiMap":
        return RoiMap(self.entries + (roi,))

    def for_class(self, cls: ActivityClass) -> list:
        return [r for r in self.entries if r.cls == cls]

    def check_coverage(self) -> "RoiMap":
        for cls in (ActivityClass.SLEEPING, ActivityClass.DAILY):
            if not self.for_class(cls):
                raise ValueError(f"ROI map has no region for {cls.slug}")
        return self

    @property
    def background_index(self) -> np.ndarray:
        mask = np.ones(N_PIXELS, dtype=bool)
        for roi in self.entries:
            mask[roi.flat_index] = False
        return np.flatnonzero(mask)

    def to_json(self) -> str:
        return json.dumps(
            [
                {"label": r.label, "class": r.cls.slug, "pixels": sorted([list(p) for p in r.pixels])}
                for r in self.entries
            ],
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "RoiMap":
        return cls(
            tuple(
                RegionOfInterest(ActivityClass.parse(d["class"]), d["label"], [tuple(p) for p in d["pixels"]])
                for d in json.loads(text)
            )
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "RoiMap":
        return cls.from_json(Path(path).read_text())


def calibrate_roi(
    reference: ThermalFrame,
    ambient: float,
    delta: float,
    cls: ActivityClass,
    label: str,
    existing: RoiMap | None = None,
) -> RegionOfInterest:
    """Tag every pixel of ``reference`` at or above ``ambient + delta``.

    The reference is a capture with the person at the location (lying on the
    bed, sitting at the table, ...).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    cls = ActivityClass.parse(cls)
    if cls not in (ActivityClass.SLEEPING, ActivityClass.DAILY):
        raise ValueError("only SLEEPING and DAILY regions can be calibrated")
    rows, cols = np.nonzero(reference.grid >= ambient + delta)
    if rows.size == 0:
        raise EmptyRoi(f"no pixel of the {label!r} reference reaches {ambient + delta:.2f} C")
    roi = RegionOfInterest(cls, label, zip(rows.tolist(), cols.tolist()))
    if existing is not None:
        for other in existing.entries:
            common = roi.pixels & other.pixels
            if common:
                raise OverlapError(f"{label!r} overlaps {other.label!r} at {sorted(common)[:3]}")
    return roi


def reduce_rois(X: np.ndarray, rois: RoiMap, reducer: str = "mean") -> np.ndarray:
    """(n, 192) frames -> (n, 3) columns a1, a2, a3.

    A class with several regions reports its warmest region (per-region
    reduction first, then max across regions); a3 is the background mean.
    """
    reduce = np.mean if reducer == "mean" else np.max
    out = np.empty((X.shape[0], 3))
    for j, cls in enumerate(TRACKED[:2]):
        per_roi = [reduce(X[:, roi.flat_index], axis=1) for roi in rois.for_class(cls)]
        out[:, j] = np.max(per_roi, axis=0) if per_roi else np.nan
    bg = rois.background_index
    out[:, 2] = X[:, bg].mean(axis=1) if bg.size else np.nan
    return out


def reduce_per_roi(X: np.ndarray, rois: RoiMap, reducer: str = "mean") -> dict:
    reduce = np.mean if reducer == "mean" else np.max
    return {roi.label: reduce(X[:, roi.flat_index], axis=1) for roi in rois.entries}


def snap_to_grid(timestamps: Sequence[int], period: int = DEFAULT_PERIOD):
    """Assign frames to a regular grid from the first to the last timestamp.

    Returns ``(start, index)`` where ``index[k]`` is the frame chosen for grid
    slot k (nearest within period/2, earlier frame on ties) or -1.
    """
    if period <= 0:
        raise ValueError("period must be positive")
    ts = np.asarray(timestamps, dtype=np.int64)
    if ts.size == 0:
        raise EmptyStream("no frames")
    if np.any(np.diff(ts) < 0):
        raise ValueError("timestamps must be non-decreasing")
    start = int(ts[0])
    n = int((ts[-1] - start) // period) + 1
    grid = start + period * np.arange(n, dtype=np.int64)
    right = np.searchsorted(ts, grid, side="left")
    left = right - 1
    # the earliest frame at or after each slot; for duplicates, left-most is the earlier one
    r_ok = right < ts.size
    l_ok = left >= 0
    d_right = np.where(r_ok, ts[np.minimum(right, ts.size - 1)] - grid, np.iinfo(np.int64).max)
    d_left = np.where(l_ok, grid - ts[np.maximum(left, 0)], np.iinfo(np.int64).max)
    if l_ok.any():
        # rewind `left` over equal timestamps so ties resolve to the earliest frame
        first_of = np.searchsorted(ts, ts, side="left")
        left = np.where(l_ok, first_of[np.maximum(left, 0)], -1)
    choose_left = d_left <= d_right
    idx = np.where(choose_left, left, right)
    dist = np.minimum(d_left, d_right)
    idx = np.where(2 * dist <= period, idx, -1)
    return start, idx


def _gridded(frames: Sequence[ThermalFrame], period: int):
    frames = list(frames)
    if not frames:
        raise EmptyStream("no frames")
    start, idx = snap_to_grid([f.timestamp for f in frames], period)
    X = np.full((idx.size, N_PIXELS), np.nan)
    have = idx >= 0
    X[have] = check_frames_array([frames[i] for i in idx[have]])
    return start, X


def build_activity_arrays(
    frames: Iterable[ThermalFrame],
    rois: RoiMap,
    period: int = DEFAULT_PERIOD,
    reducer: str = "mean",
) -> dict:
    """Per-class activity arrays {SLEEPING: A1, DAILY: A2, NO_ACTIVITY: A3}.

    Grid slots without a frame are NaN in all three arrays.
    """
    rois.check_coverage()
    start, X = _gridded(frames, period)
    values = reduce_rois(X, rois, reducer)
    return {cls: ActivityArray(cls, start, period, values[:, j]) for j, cls in enumerate(TRACKED)}


def build_roi_series(frames, rois: RoiMap, period: int = DEFAULT_PERIOD, reducer: str = "mean") -> dict:
    """One gridded series per region label, for inspecting merged classes."""
    start, X = _gridded(frames, period)
    return {
        label: ActivityArray(next(r.cls for r in rois.entries if r.label == label), start, period, v)
        for label, v in reduce_per_roi(X, rois, reducer).items()
    }


def stack_arrays(arrays: dict) -> np.ndarray:
    """dict of ActivityArray -> (n, 3) matrix in class order 1, 2, 3."""
    cols = [arrays[cls].values for cls in TRACKED]
    if len({len(c) for c in cols}) != 1:
        raise ValueError("activity arrays differ in length")
    return np.column_stack(cols)


def occupied_temperatures(arrays: dict, labels: np.ndarray) -> np.ndarray:
    """Occupied-region temperature per slot: a1 while sleeping, a2 while daily, else NaN."""
    labels = np.asarray(labels)
    a1 = arrays[ActivityClass.SLEEPING].values
    a2 = arrays[ActivityClass.DAILY].values
    if labels.size != a1.size:
        raise ValueError("timeline and arrays are not aligned")
    return np.where(
        labels == ActivityClass.SLEEPING, a1, np.where(labels == ActivityClass.DAILY, a2, np.nan)
    )


def person_avg_temperature(arrays: dict, timeline) -> float:
    """Mean occupied-region temperature over every occupied slot."""
    labels = getattr(timeline, "labels", timeline)
    occ = occupied_temperatures(arrays, labels)
    occ = occ[~np.isnan(occ)]
    if occ.size == 0:
        raise NoOccupiedSamples("timeline has no occupied sample with a value")
    return float(occ.mean())


def write_arrays_csv(path, arrays: dict) -> None:
    ref = arrays[ActivityClass.SLEEPING]
    X = stack_arrays(arrays)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "timestamp", "a1", "a2", "a3"])
        for t, (ts, row) in enumerate(zip(ref.timestamps, X)):
            w.writerow([t, format_timestamp(ts)] + ["" if np.isnan(v) else f"{v:.4f}" for v in row])


def read_arrays_csv(path, period: int = DEFAULT_PERIOD) -> dict:
    from .model import to_timestamp

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise EmptyStream(f"{path}: no samples")
    start = to_timestamp(rows[0]["timestamp"])
    if len(rows) > 1:
        period = to_timestamp(rows[1]["timestamp"]) - start
    cols = [[float(r[k]) if r[k] else np.nan for r in rows] for k in ("a1", "a2", "a3")]
    return {cls: ActivityArray(cls, start, period, c) for cls, c in zip(TRACKED, cols)}


class RoiTracker(TransformerMixin, BaseEstimator):
    """Calibrate regions from reference captures, then map frames to (a1, a2, a3).

    ``fit(X, y)`` takes reference captures X and the region label of each
    capture in y; captures sharing a label are averaged before thresholding.
    ``roi_classes`` maps each label to its activity class. A pre-built
    ``rois`` map skips calibration.
    """

    def __init__(self, roi_classes=None, ambient=22.0, delta=8.0, reducer="mean", rois=None):
        self.roi_classes = roi_classes
        self.ambient = ambient
        self.delta = delta
        self.reducer = reducer
        self.rois = rois

    def fit(self, X=None, y=None):
        if self.reducer not in ("mean", "max"):
            raise ValueError("reducer must be 'mean' or 'max'")
        if self.rois is not None:
            self.roi_map_ = self.rois.check_coverage()
        else:
            if X is None or y is None:
                raise ValueError("reference captures and their labels are required")
            X = check_frames_array(X)
            y = np.asarray(y)
            if len(y) != len(X):
                raise ValueError("one label per reference capture is required")
            classes = self.roi_classes or {}
            roi_map = RoiMap()
            for label in dict.fromkeys(y.tolist()):
                ref = mean_frame([ThermalFrame(0, row) for row in X[y == label]])
                if label not in classes:
                    raise ValueError(f"no activity class given for region {label!r}")
                roi_map = roi_map.add(
                    calibrate_roi(ref, self.ambient, self.delta, classes[label], label, roi_map)
                )
            self.roi_map_ = roi_map.check_coverage()
        self.n_features_in_ = N_PIXELS
        return self

    def transform(self, X):
        check_is_fitted(self, "roi_map_")
        return reduce_rois(check_frames_array(X), self.roi_map_, self.reducer)

