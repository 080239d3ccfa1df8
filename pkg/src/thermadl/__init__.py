"""Activity-of-daily-living monitoring from a 16x12 thermal sensor array."""

from .classification import (
    ActivityClassifier,
    ActivityTimeline,
    Segment,
    classify_arrays,
    classify_sample,
    segment,
    smooth,
)
from .imaging import BilinearUpsampler, interpolate, locate_person, thermal_spread
from .model import (
    ActivityArray,
    ActivityClass,
    MonitoringConfig,
    RegionOfInterest,
    ThermalFrame,
    frame_stats,
    read_frames,
    validate_frame,
    write_frames,
)
from .tracking import RoiMap, RoiTracker, build_activity_arrays, calibrate_roi, person_avg_temperature

__version__ = "0.1.0"

__all__ = [
    "ActivityArray",
    "ActivityClass",
    "ActivityClassifier",
    "ActivityTimeline",
    "BilinearUpsampler",
    "MonitoringConfig",
    "RegionOfInterest",
    "RoiMap",
    "RoiTracker",
    "Segment",
    "ThermalFrame",
    "build_activity_arrays",
    "calibrate_roi",
    "classify_arrays",
    "classify_sample",
    "frame_stats",
    "interpolate",
    "locate_person",
    "person_avg_temperature",
    "read_frames",
    "segment",
    "smooth",
    "thermal_spread",
    "validate_frame",
    "write_frames",
]
