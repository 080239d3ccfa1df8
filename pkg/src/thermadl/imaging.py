"""Frame-level spatial processing: upscaling, person localization, spread."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_frames_array
from .model import COLS, ROWS, ThermalFrame

OUT_ROWS = 128
OUT_COLS = 176


@dataclass(frozen=True)
class InterpolatedImage:
    pixels: np.ndarray

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class PersonLocation:
    centroid: tuple
    peak_temp: float
    support: int


@dataclass(frozen=True)
class Spread:
    area: int
    rms_radius: float


def _axis_weights(src_pos: np.ndarray, n_src: int) -> np.ndarray:
    """Linear interpolation weights (len(src_pos), n_src) for fractional source positions."""
    src_pos = np.clip(np.asarray(src_pos, dtype=np.float64), 0.0, n_src - 1)
    lo = np.minimum(np.floor(src_pos).astype(np.intp), n_src - 2)
    frac = src_pos - lo
    w = np.zeros((src_pos.size, n_src))
    idx = np.arange(src_pos.size)
    w[idx, lo] = 1.0 - frac
    w[idx, lo + 1] += frac
    return w


@lru_cache(maxsize=8)
def _resize_weights(n_src: int, n_dst: int) -> np.ndarray:
    # corner-aligned: dst 0 -> src 0, dst n_dst-1 -> src n_src-1
    pos = np.arange(n_dst) * (n_src - 1) / (n_dst - 1)
    w = _axis_weights(pos, n_src)
    w.flags.writeable = False
    return w


def output_to_source(dst_row, dst_col, shape=(OUT_ROWS, OUT_COLS)):
    """Map (possibly fractional) output coordinates onto the source grid."""
    return (
        np.asarray(dst_row, dtype=np.float64) * (ROWS - 1) / (shape[0] - 1),
        np.asarray(dst_col, dtype=np.float64) * (COLS - 1) / (shape[1] - 1),
    )


def bilinear_sample(grid: np.ndarray, src_row, src_col) -> np.ndarray:
    """Evaluate the bilinear interpolant of ``grid`` at fractional source coordinates."""
    src_row = np.atleast_1d(np.asarray(src_row, dtype=np.float64))
    src_col = np.atleast_1d(np.asarray(src_col, dtype=np.float64))
    wr = _axis_weights(src_row.ravel(), grid.shape[0])
    wc = _axis_weights(src_col.ravel(), grid.shape[1])
    out = np.einsum("ij,jk,ik->i", wr, grid, wc)
    return out.reshape(np.broadcast(src_row, src_col).shape)


def upsample_grid(grid: np.ndarray, shape=(OUT_ROWS, OUT_COLS)) -> np.ndarray:
    wr = _resize_weights(grid.shape[-2], shape[0])
    wc = _resize_weights(grid.shape[-1], shape[1])
    return wr @ grid @ wc.T


def interpolate(frame: ThermalFrame, shape=(OUT_ROWS, OUT_COLS)) -> InterpolatedImage:
    """Bilinear upscale of a 12x16 frame to 128x176 (rows x cols), corners aligned."""
    return InterpolatedImage(upsample_grid(frame.grid, shape))


def _hot_pixels(frame: ThermalFrame, ambient: float, delta: float):
    if delta <= 0:
        raise ValueError("delta must be positive")
    grid = frame.grid
    mask = grid > ambient + delta
    if not mask.any():
        return None
    rows, cols = np.nonzero(mask)
    return rows, cols, grid[mask]


def locate_person(frame: ThermalFrame, ambient: float, delta: float = 2.0) -> PersonLocation | None:
    """Centroid of the pixels warmer than ``ambient + delta``.

    Pixels are weighted by their excess over ambient. Returns None when no
    pixel clears the threshold.
    """
    hot = _hot_pixels(frame, ambient, delta)
    if hot is None:
        return None
    rows, cols, temps = hot
    w = temps - ambient
    centroid = (float(np.dot(w, rows) / w.sum()), float(np.dot(w, cols) / w.sum()))
    return PersonLocation(centroid, float(temps.max()), int(temps.size))


def thermal_spread(frame: ThermalFrame, ambient: float, delta: float = 2.0) -> Spread | None:
    """Area and RMS radius (about the weighted centroid) of the warm region.

    An upright person gives a compact blob; lying down spreads the heat over
    a wider, more scattered footprint.
    """
    hot = _hot_pixels(frame, ambient, delta)
    if hot is None:
        return None
    rows, cols, temps = hot
    w = temps - ambient
    cr, cc = np.dot(w, rows) / w.sum(), np.dot(w, cols) / w.sum()
    d2 = (rows - cr) ** 2 + (cols - cc) ** 2
    return Spread(int(temps.size), float(np.sqrt(d2.mean())))


def to_gray(pixels: np.ndarray) -> np.ndarray:
    """Linear map of [min, max] onto 0..255."""
    lo, hi = float(pixels.min()), float(pixels.max())
    if hi <= lo:
        return np.zeros(pixels.shape, dtype=np.uint8)
    return np.round((pixels - lo) * (255.0 / (hi - lo))).astype(np.uint8)


def render(image: InterpolatedImage | np.ndarray, path) -> Path:
    """Write a grayscale PGM (or PNG when the suffix asks for it, needs Pillow)."""
    pixels = image.pixels if isinstance(image, InterpolatedImage) else np.asarray(image)
    gray = to_gray(pixels)
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        Image.fromarray(gray, mode="L").save(path)
    else:
        h, w = gray.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(gray.tobytes())
    return path


class BilinearUpsampler(TransformerMixin, BaseEstimator):
    """Transformer wrapping :func:`upsample_grid` for (n, 192) or (n, 12, 16) input.

    Output has shape (n, out_rows, out_cols).
    """

    def __init__(self, out_shape=(OUT_ROWS, OUT_COLS)):
        self.out_shape = out_shape

    def fit(self, X, y=None):
        X = check_frames_array(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_frames_array(X).reshape(-1, ROWS, COLS)
        return upsample_grid(X, tuple(self.out_shape))
