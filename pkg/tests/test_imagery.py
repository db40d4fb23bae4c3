import numpy as np
import pytest

from rnntrack.geometry import AffineState, box_from_state, state_from_box
from rnntrack.imagery import (GrayImage, decompose_patches,
                              decompose_patches_batch, to_gray, warp_region,
                              warp_regions)


def reference_warp(pixels, state, size=32):
    """Independent scalar-loop bilinear resampler (test oracle)."""
    import math
    w_box = 32 * state.scale
    h_box = w_box * state.aspect
    c, s = math.cos(state.rotation), math.sin(state.rotation)
    out = np.empty((size, size))
    h, w = pixels.shape
    for i in range(size):
        v = (i + 0.5) / size - 0.5
        for j in range(size):
            u = (j + 0.5) / size - 0.5
            # rotation @ shear @ diag(w_box, h_box)
            ux = w_box * u + state.skew * h_box * v
            vy = h_box * v
            x = c * ux - s * vy + state.tx
            y = s * ux + c * vy + state.ty
            x = min(max(x, 0.0), w - 1.0)
            y = min(max(y, 0.0), h - 1.0)
            x0, y0 = int(math.floor(x)), int(math.floor(y))
            x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
            fx, fy = x - x0, y - y0
            top = pixels[y0, x0] * (1 - fx) + pixels[y0, x1] * fx
            bot = pixels[y1, x0] * (1 - fx) + pixels[y1, x1] * fx
            out[i, j] = top * (1 - fy) + bot * fy
    return out


class TestToGray:
    def test_all_white_rgb(self):
        img = to_gray(np.full((4, 5, 3), 255, dtype=np.uint8))
        assert np.all(img.pixels == 1.0)

    def test_all_black(self):
        img = to_gray(np.zeros((4, 5), dtype=np.uint8))
        assert np.all(img.pixels == 0.0)

    def test_mid_gray_pixel(self):
        img = to_gray(np.full((1, 1, 3), 128, dtype=np.uint8))
        assert abs(img.pixels[0, 0] - 128 / 255) < 1e-6

    def test_empty_image_rejected(self):
        with pytest.raises(ValueError):
            to_gray(np.zeros((0, 0)))

    def test_output_in_unit_range(self):
        rng = np.random.default_rng(0)
        img = to_gray(rng.integers(0, 256, (20, 30, 3)).astype(np.uint8))
        assert img.pixels.min() >= 0.0 and img.pixels.max() <= 1.0


class TestGrayImage:
    def test_shape_properties(self):
        img = GrayImage(np.zeros((4, 7)))
        assert (img.height, img.width) == (4, 7)
        assert img.data.shape == (28,)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            GrayImage(np.full((2, 2), 1.5))


class TestWarpRegion:
    def test_constant_image_identity(self):
        img = GrayImage(np.full((64, 64), 0.5))
        region = warp_region(img, AffineState(tx=31.5, ty=31.5, scale=1.0))
        assert region.shape == (32, 32)
        assert np.allclose(region, 0.5)

    def test_integer_aligned_crop_is_exact(self):
        rng = np.random.default_rng(1)
        img = GrayImage(rng.uniform(0, 1, (64, 64)))
        # 32x32 crop with top-left pixel (10, 6): center at col 10+15.5, row 6+15.5
        state = AffineState(tx=25.5, ty=21.5, scale=1.0)
        region = warp_region(img, state)
        assert np.array_equal(region, img.pixels[6:38, 10:42])

    def test_checkerboard_crop_matches_reference_resampler(self):
        base = np.indices((60, 60)).sum(axis=0) % 2
        img = GrayImage(base.astype(np.float64))
        # 48x48 crop resampled down to 32x32
        state = AffineState(tx=29.5, ty=29.5, scale=1.5)
        assert np.allclose(warp_region(img, state),
                           reference_warp(img.pixels, state), atol=1e-12)

    def test_rotated_state_matches_reference_resampler(self):
        rng = np.random.default_rng(2)
        img = GrayImage(rng.uniform(0, 1, (50, 70)))
        state = AffineState(tx=30.0, ty=25.0, scale=0.8,
                            rotation=0.3, aspect=1.2, skew=0.1)
        assert np.allclose(warp_region(img, state),
                           reference_warp(img.pixels, state), atol=1e-12)

    def test_translation_shifts_mean_by_gradient_slope(self):
        slope = 1.0 / 200.0
        cols = np.arange(100) * slope
        img = GrayImage(np.tile(cols, (60, 1)))
        s0 = AffineState(tx=40.0, ty=30.0, scale=1.0)
        s1 = AffineState(tx=41.0, ty=30.0, scale=1.0)
        m0 = warp_region(img, s0).mean()
        m1 = warp_region(img, s1).mean()
        assert abs((m1 - m0) - slope) < 1e-12

    def test_border_clamp_keeps_values_in_range(self):
        rng = np.random.default_rng(3)
        img = GrayImage(rng.uniform(0, 1, (40, 40)))
        region = warp_region(img, AffineState(tx=-5.0, ty=45.0, scale=2.0))
        assert region.min() >= 0.0 and region.max() <= 1.0

    def test_batch_matches_single(self):
        rng = np.random.default_rng(4)
        img = GrayImage(rng.uniform(0, 1, (48, 48)))
        states = [AffineState(20.0 + i, 22.0, 1.0 + 0.05 * i, 0.1 * i, 1.0, 0.0)
                  for i in range(5)]
        batch = warp_regions(img, states)
        for i, s in enumerate(states):
            assert np.array_equal(batch[i], warp_region(img, s))

    def test_nonfinite_state_rejected(self):
        with pytest.raises(ValueError):
            AffineState(tx=np.nan, ty=0.0, scale=1.0)
        with pytest.raises(ValueError):
            AffineState(tx=0.0, ty=0.0, scale=-1.0)


class TestDecomposePatches:
    def test_constant_region(self):
        patches = decompose_patches(np.full((32, 32), 0.7))
        assert patches.shape == (9, 256)
        assert np.all(patches == 0.7)

    def test_center_patch_window(self):
        rng = np.random.default_rng(5)
        region = rng.uniform(0, 1, (32, 32))
        patches = decompose_patches(region)
        assert np.array_equal(patches[4], region[8:24, 8:24].ravel())

    def test_corner_patches_disjoint(self):
        region = np.zeros((32, 32))
        region[:16, :16] = 1.0  # patch 1 window
        patches = decompose_patches(region)
        assert np.all(patches[0] == 1.0)
        assert np.all(patches[8] == 0.0)

    def test_windows_cover_whole_region(self):
        covered = np.zeros((32, 32), dtype=bool)
        for k in range(9):
            r, c = 8 * (k // 3), 8 * (k % 3)
            covered[r:r + 16, c:c + 16] = True
        assert covered.all()

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        region = rng.uniform(0, 1, (32, 32))
        assert np.array_equal(decompose_patches(region), decompose_patches(region))

    def test_batch_matches_single(self):
        rng = np.random.default_rng(7)
        regions = rng.uniform(0, 1, (4, 32, 32))
        batch = decompose_patches_batch(regions)
        for i in range(4):
            assert np.array_equal(batch[i], decompose_patches(regions[i]))

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError):
            decompose_patches(np.zeros((31, 32)))


class TestBoxStateConversion:
    def test_round_trip(self):
        box = np.array([13.0, 7.0, 40.0, 30.0])
        assert np.allclose(box_from_state(state_from_box(box)), box)

    def test_centered_crop_state(self):
        state = state_from_box((11, 7, 32, 32))
        assert (state.tx, state.ty) == (25.5, 21.5)
        assert state.scale == 1.0 and state.aspect == 1.0

    def test_degenerate_box_rejected(self):
        with pytest.raises(ValueError):
            state_from_box((1, 1, 0, 10))
