"""Input validation helpers for the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .model import COLS, N_PIXELS, ROWS, TEMP_MAX, TEMP_MIN, OutOfRange, ThermalFrame, WrongLength


def check_frames_array(X) -> np.ndarray:
    """Coerce frames to a float (n, 192) array.

    Accepts a sequence of ThermalFrame, an (n, 192) array or an (n, 12, 16)
    array. Pixels must be finite and inside the sensor envelope.
    """
    if len(X) and isinstance(X[0], ThermalFrame):
        X = np.stack([f.pixels for f in X])
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        if X.shape[1:] != (ROWS, COLS):
            raise WrongLength(f"expected frames of shape ({ROWS}, {COLS}), got {X.shape[1:]}")
        X = X.reshape(len(X), N_PIXELS)
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != N_PIXELS:
        raise WrongLength(f"expected {N_PIXELS} features per frame, got {X.shape[1]}")
    if (X < TEMP_MIN).any() or (X > TEMP_MAX).any():
        raise OutOfRange(f"pixels outside [{TEMP_MIN}, {TEMP_MAX}]")
    return X


def check_activity_matrix(X) -> np.ndarray:
    """Coerce activity samples to an (n, 3) float array; NaN marks absent samples."""
    X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan", ensure_min_samples=0)
    if X.shape[1] != 3:
        raise ValueError(f"expected 3 activity columns (a1, a2, a3), got {X.shape[1]}")
    return X
