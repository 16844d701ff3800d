"""Dense 2D density grids, scene geometry and weight vectors.

Grids are numpy arrays of shape ``(height, width)`` indexed ``values[y, x]``
with the origin at the top-left pixel.  Pixel ``(x, y)`` has its center at
the continuous coordinate ``(x, y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import AllZeroMap


@dataclass(frozen=True)
class SceneGeometry:
    width_px: int
    height_px: int
    width_deg: float
    height_deg: float
    fps: float = 25.0

    def __post_init__(self):
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError("pixel dimensions must be >= 1")
        if not (self.width_deg > 0 and self.height_deg > 0 and self.fps > 0):
            raise ValueError("visual angles and fps must be > 0")
        for v in (self.width_deg, self.height_deg, self.fps):
            if not math.isfinite(v):
                raise ValueError("geometry values must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height_px, self.width_px)

    @property
    def n_pixels(self) -> int:
        return self.width_px * self.height_px

    @property
    def px_per_deg_x(self) -> float:
        return self.width_px / self.width_deg

    @property
    def px_per_deg_y(self) -> float:
        return self.height_px / self.height_deg

    def downsampled(self, factor: int) -> "SceneGeometry":
        """Geometry of the grid obtained by ``factor``x``factor`` block averaging."""
        if factor < 1:
            raise ValueError("downsample factor must be >= 1")
        if self.width_px % factor or self.height_px % factor:
            raise ValueError(
                f"downsample factor {factor} does not divide "
                f"{self.width_px}x{self.height_px}")
        return SceneGeometry(self.width_px // factor, self.height_px // factor,
                             self.width_deg, self.height_deg, self.fps)


# PAL video geometry: 720x576 px spanning 28 x 22.5 deg.
PAL_GEOMETRY = SceneGeometry(720, 576, 28.0, 22.5, 25.0)


@dataclass(frozen=True)
class DensityMap:
    """Non-negative grid summing to one.

    ``flag`` is set when a builder fell back to the uniform map
    (e.g. ``"EmptyMask"``, ``"FlatInput"``, ``"StaticWindow"``).
    """
    geometry: SceneGeometry
    values: np.ndarray
    flag: Optional[str] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != self.geometry.shape:
            raise ValueError(f"values shape {values.shape} does not match "
                             f"geometry {self.geometry.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def argmax(self) -> tuple[int, int]:
        """(x, y) of the largest value."""
        y, x = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(x), int(y)


def normalize_to_pdf(raw, geometry: SceneGeometry, flag: Optional[str] = None) -> DensityMap:
    """Clamp negatives to zero and rescale to unit sum."""
    clamped = np.clip(np.asarray(raw, dtype=np.float64), 0.0, None)
    total = clamped.sum()
    if not total > 0 or not np.isfinite(total):
        raise AllZeroMap("map has no positive mass")
    return DensityMap(geometry, clamped / total, flag)


def uniform_values(geometry: SceneGeometry) -> np.ndarray:
    return np.full(geometry.shape, 1.0 / geometry.n_pixels)


def deg_to_px(value_deg: float, axis: str, geometry: SceneGeometry) -> float:
    if axis == "horizontal":
        return value_deg * geometry.px_per_deg_x
    if axis == "vertical":
        return value_deg * geometry.px_per_deg_y
    raise ValueError(f"unknown axis {axis!r}")


def normalize_weights(beta) -> np.ndarray:
    """Min-max normalization to [0, 1].

    A constant vector maps to all zeros when it is all-zero, else all ones.
    """
    beta = np.asarray(beta, dtype=np.float64)
    if beta.size == 0:
        raise ValueError("beta must be non-empty")
    lo, hi = beta.min(), beta.max()
    if hi == lo:
        return np.zeros_like(beta) if hi == 0 else np.ones_like(beta)
    return (beta - lo) / (hi - lo)


@dataclass(frozen=True)
class WeightVector:
    names: tuple[str, ...]
    beta: np.ndarray
    beta_norm: np.ndarray = field(default=None)
    frame_index: Optional[int] = None
    method: Optional[str] = None
    intercept: float = 0.0

    def __post_init__(self):
        names = tuple(self.names)
        beta = np.array(self.beta, dtype=np.float64).reshape(-1)
        if len(names) != beta.size:
            raise ValueError("names and beta differ in length")
        if self.beta_norm is None:
            beta_norm = normalize_weights(beta)
        else:
            beta_norm = np.array(self.beta_norm, dtype=np.float64).reshape(-1)
            if beta_norm.size != beta.size:
                raise ValueError("beta_norm and beta differ in length")
        beta.setflags(write=False)
        beta_norm.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "beta_norm", beta_norm)

    @classmethod
    def from_beta(cls, names: Sequence[str], beta, **tags) -> "WeightVector":
        return cls(tuple(names), beta, None, **tags)

    def __getitem__(self, name: str) -> float:
        return float(self.beta[self.names.index(name)])

    def normalized(self, name: str) -> float:
        return float(self.beta_norm[self.names.index(name)])

    def n_active(self) -> int:
        return int(np.count_nonzero(self.beta))

    def top_feature(self) -> str:
        return self.names[int(np.argmax(self.beta))]


def block_average(values: np.ndarray, factor: int) -> np.ndarray:
    """Average non-overlapping ``factor``x``factor`` blocks of the trailing two axes."""
    if factor == 1:
        return np.asarray(values, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    *lead, h, w = values.shape
    if h % factor or w % factor:
        raise ValueError(f"downsample factor {factor} does not divide {w}x{h}")
    blocks = values.reshape(*lead, h // factor, factor, w // factor, factor)
    return blocks.mean(axis=(-3, -1))


def to_downsampled_coords(x: float, y: float, factor: int) -> tuple[float, float]:
    """Map a full-resolution coordinate onto the block-averaged grid."""
    offset = (factor - 1) / 2.0
    return (x - offset) / factor, (y - offset) / factor


def pixel_index(x: float, y: float, geometry: SceneGeometry) -> Optional[tuple[int, int]]:
    """Nearest pixel (col, row) for an on-screen coordinate, None if off-screen."""
    if not (0 <= x < geometry.width_px and 0 <= y < geometry.height_px):
        return None
    col = min(int(math.floor(x + 0.5)), geometry.width_px - 1)
    row = min(int(math.floor(y + 0.5)), geometry.height_px - 1)
    return col, row
