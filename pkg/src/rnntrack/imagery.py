"""Image ingestion, affine region warping and patch decomposition.

Candidate regions are resampled to a canonical 32x32 luminance window
and split into 9 overlapping 16x16 patches laid out on a 3x3 grid with
stride 8 (the only layout fitting nine overlapping 16x16 windows into
32x32).  Patch positions are numbered 1..9 in row-major order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import REGION_SIZE, AffineState, affine_matrix

PATCH_SIZE = 16
PATCH_STRIDE = 8
N_PATCHES = 9
PATCH_DIM = PATCH_SIZE * PATCH_SIZE

# integer BT.601 luminance approximation; dyadic weights sum to exactly 1
_LUMA = np.array([77.0, 150.0, 29.0]) / 256.0

# canonical pixel-center coordinates of the 32x32 output grid
_GRID = (np.arange(REGION_SIZE) + 0.5) / REGION_SIZE - 0.5


@dataclass
class GrayImage:
    """Single-channel image, row-major float64 luminance in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ValueError("GrayImage needs a non-empty 2-D pixel array")
        lo, hi = self.pixels.min(), self.pixels.max()
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"luminance out of [0,1]: min={lo}, max={hi}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def data(self) -> np.ndarray:
        return self.pixels.ravel()


def to_gray(image) -> GrayImage:
    """Convert a raster (H,W), (H,W,3) or (H,W,4) to unit-range luminance.

    Integer inputs are scaled by their dtype maximum; floats are expected
    in [0, 1] already.  Color is reduced with BT.601 weights.
    """
    arr = np.asarray(image)
    if arr.size == 0:
        raise ValueError("empty image")
    if np.issubdtype(arr.dtype, np.integer):
        arr = arr.astype(np.float64) / np.iinfo(arr.dtype).max
    else:
        arr = arr.astype(np.float64)
    if arr.ndim == 3:
        if arr.shape[2] == 4:
            arr = arr[:, :, :3]
        if arr.shape[2] == 3:
            arr = arr @ _LUMA
        elif arr.shape[2] == 1:
            arr = arr[:, :, 0]
        else:
            raise ValueError(f"unsupported channel count {arr.shape[2]}")
    elif arr.ndim != 2:
        raise ValueError(f"unsupported raster shape {arr.shape}")
    return GrayImage(np.clip(arr, 0.0, 1.0))


def warp_regions(image: GrayImage, states) -> np.ndarray:
    """Resample each state's region to 32x32; returns (len(states), 32, 32).

    Regions are sampled bilinearly on the affine image of the canonical
    unit square; samples beyond the image clamp to the border pixel.
    """
    if len(states) == 0:
        return np.zeros((0, REGION_SIZE, REGION_SIZE))
    mats = np.stack([affine_matrix(s) for s in states])
    centers = np.array([[s.tx, s.ty] for s in states])
    return _kernels.warp_batch(image.pixels, mats, centers, _GRID)


def warp_region(image: GrayImage, state: AffineState) -> np.ndarray:
    """Single-state warp_regions."""
    return warp_regions(image, [state])[0]


def decompose_patches(region: np.ndarray) -> np.ndarray:
    """Split a 32x32 region into 9 overlapping 16x16 patches.

    Returns a (9, 256) array; row k-1 is the row-major vectorization of
    the window at offset (8*(k-1 mod 3), 8*(k-1 div 3)) for position k.
    """
    region = np.asarray(region, dtype=np.float64)
    if region.shape != (REGION_SIZE, REGION_SIZE):
        raise ValueError(f"region must be 32x32, got {region.shape}")
    return decompose_patches_batch(region[None])[0]


def decompose_patches_batch(regions: np.ndarray) -> np.ndarray:
    """decompose_patches over a (K, 32, 32) stack; returns (K, 9, 256)."""
    regions = np.asarray(regions, dtype=np.float64)
    k = regions.shape[0]
    out = np.empty((k, N_PATCHES, PATCH_DIM))
    for p in range(N_PATCHES):
        r = PATCH_STRIDE * (p // 3)
        c = PATCH_STRIDE * (p % 3)
        out[:, p, :] = regions[:, r:r + PATCH_SIZE, c:c + PATCH_SIZE].reshape(k, PATCH_DIM)
    return out
