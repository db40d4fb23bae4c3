"""Affine candidate states and box conversions.

A state describes a candidate region by the center of its bounding
quadrilateral plus shape parameters.  The canonical observation is a
32x32 window; ``scale`` is the ratio of the region width to those 32
pixels, ``aspect`` is height/width.  Image coordinates are continuous
with pixel centers at integers, (0, 0) at the top-left pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REGION_SIZE = 32


@dataclass(frozen=True)
class AffineState:
    """Six-component geometric state of a candidate region."""

    tx: float
    ty: float
    scale: float
    rotation: float = 0.0
    aspect: float = 1.0
    skew: float = 0.0

    def __post_init__(self):
        vals = (self.tx, self.ty, self.scale, self.rotation, self.aspect, self.skew)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("affine state components must be finite")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.aspect <= 0:
            raise ValueError("aspect must be positive")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.tx, self.ty, self.scale, self.rotation, self.aspect, self.skew],
            dtype=np.float64,
        )

    @staticmethod
    def from_array(a) -> "AffineState":
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (6,):
            raise ValueError("state array must have 6 components")
        return AffineState(*a.tolist())


def affine_matrix(state: AffineState) -> np.ndarray:
    """2x2 map from canonical unit-square coordinates to image pixels.

    Column vectors (u, v) in [-0.5, 0.5]^2 map to offsets from the state
    center: rotation o (shear by skew) o diag(width, height).
    """
    w = REGION_SIZE * state.scale
    h = w * state.aspect
    c, s = math.cos(state.rotation), math.sin(state.rotation)
    rot = np.array([[c, -s], [s, c]])
    shear = np.array([[1.0, state.skew], [0.0, 1.0]])
    return rot @ shear @ np.diag([w, h])


def state_from_box(box, origin_one_indexed: bool = True) -> AffineState:
    """Axis-aligned (x, y, w, h) box to the equivalent affine state."""
    x, y, w, h = (float(v) for v in box)
    if w <= 0 or h <= 0:
        raise ValueError("box width and height must be positive")
    if origin_one_indexed:
        x, y = x - 1.0, y - 1.0
    return AffineState(
        tx=x + (w - 1.0) / 2.0,
        ty=y + (h - 1.0) / 2.0,
        scale=w / REGION_SIZE,
        rotation=0.0,
        aspect=h / w,
        skew=0.0,
    )


def box_from_state(state: AffineState, origin_one_indexed: bool = True) -> np.ndarray:
    """Axis-aligned bounding box (x, y, w, h) of a state's region.

    Exact inverse of state_from_box for zero rotation/skew; otherwise the
    bounding box of the transformed unit square.
    """
    m = affine_matrix(state)
    ex = (abs(m[0, 0]) + abs(m[0, 1]))  # full width of the bounding box
    ey = (abs(m[1, 0]) + abs(m[1, 1]))
    x = state.tx - (ex - 1.0) / 2.0
    y = state.ty - (ey - 1.0) / 2.0
    if origin_one_indexed:
        x, y = x + 1.0, y + 1.0
    return np.array([x, y, ex, ey], dtype=np.float64)
