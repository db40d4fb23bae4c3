"""Hot numerical loops, JIT-compiled when numba is available.

The numpy fallbacks are the reference implementations; the compiled
kernels perform the same floating-point operations in the same order,
so both paths produce identical results.  numba is imported lazily on
first use to keep import time low for commands that never touch the
batch paths.
"""

from __future__ import annotations

import numpy as np


def _cd_lasso_ref(gram, corr, lam, tol, max_sweeps):
    """Cyclic non-negative coordinate descent, vectorized over rows.

    Maintains resid = corr - beta @ gram; each row sweeps until its own
    largest coefficient change drops below tol.
    """
    n_atoms = gram.shape[0]
    beta = np.zeros_like(corr)
    resid = corr.copy()
    active = np.arange(corr.shape[0])
    for _ in range(max_sweeps):
        if active.size == 0:
            break
        b = beta[active]
        r = resid[active]
        worst = np.zeros(len(active))
        for j in range(n_atoms):
            new = np.maximum(b[:, j] + r[:, j] - lam, 0.0)
            delta = new - b[:, j]
            moved = delta != 0.0
            if np.any(moved):
                r[moved] -= delta[moved, None] * gram[j]
                b[moved, j] = new[moved]
            np.maximum(worst, np.abs(delta), out=worst)
        beta[active] = b
        resid[active] = r
        active = active[worst >= tol]
    return beta


def _cd_lasso_jit(gram, corr, lam, tol, max_sweeps):  # compiled by _init
    n_rows, n_atoms = corr.shape
    beta = np.zeros((n_rows, n_atoms))
    for i in range(n_rows):
        r = corr[i].copy()
        for _ in range(max_sweeps):
            worst = 0.0
            for j in range(n_atoms):
                old = beta[i, j]
                new = old + r[j] - lam
                if new < 0.0:
                    new = 0.0
                delta = new - old
                if delta != 0.0:
                    beta[i, j] = new
                    for k in range(n_atoms):
                        r[k] -= delta * gram[j, k]
                    ad = abs(delta)
                    if ad > worst:
                        worst = ad
            if worst < tol:
                break
    return beta


def _warp_ref(pixels, mats, centers, grid):
    """Bilinear resample of affine-mapped unit squares, (K, S, S)."""
    u = grid[None, None, :]
    v = grid[None, :, None]
    xs = mats[:, 0, 0, None, None] * u + mats[:, 0, 1, None, None] * v + centers[:, 0, None, None]
    ys = mats[:, 1, 0, None, None] * u + mats[:, 1, 1, None, None] * v + centers[:, 1, None, None]
    h, w = pixels.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = pixels[y0, x0] * (1.0 - fx) + pixels[y0, x1] * fx
    bot = pixels[y1, x0] * (1.0 - fx) + pixels[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def _warp_jit(pixels, mats, centers, grid):  # compiled by _init
    h, w = pixels.shape
    n_states = mats.shape[0]
    size = grid.shape[0]
    out = np.empty((n_states, size, size))
    for s in range(n_states):
        m00, m01 = mats[s, 0, 0], mats[s, 0, 1]
        m10, m11 = mats[s, 1, 0], mats[s, 1, 1]
        cx, cy = centers[s, 0], centers[s, 1]
        for i in range(size):
            v = grid[i]
            for j in range(size):
                u = grid[j]
                x = m00 * u + m01 * v + cx
                y = m10 * u + m11 * v + cy
                if x < 0.0:
                    x = 0.0
                elif x > w - 1.0:
                    x = w - 1.0
                if y < 0.0:
                    y = 0.0
                elif y > h - 1.0:
                    y = h - 1.0
                x0 = int(np.floor(x))
                y0 = int(np.floor(y))
                x1 = min(x0 + 1, w - 1)
                y1 = min(y0 + 1, h - 1)
                fx = x - x0
                fy = y - y0
                top = pixels[y0, x0] * (1.0 - fx) + pixels[y0, x1] * fx
                bot = pixels[y1, x0] * (1.0 - fx) + pixels[y1, x1] * fx
                out[s, i, j] = top * (1.0 - fy) + bot * fy
    return out


_cd_lasso = None
_warp = None


def _init():
    global _cd_lasso, _warp
    if _cd_lasso is not None:
        return
    try:
        from numba import njit
        _cd_lasso = njit(cache=True)(_cd_lasso_jit)
        _warp = njit(cache=True)(_warp_jit)
    except ImportError:
        _cd_lasso = _cd_lasso_ref
        _warp = _warp_ref


def cd_lasso(gram, corr, lam, tol, max_sweeps):
    _init()
    return _cd_lasso(gram, corr, float(lam), float(tol), int(max_sweeps))


def warp_batch(pixels, mats, centers, grid):
    _init()
    return _warp(pixels, mats, centers, grid)
