import numpy as np

from rnntrack import _kernels


def test_cd_paths_agree_bitwise():
    rng = np.random.default_rng(0)
    atoms = rng.normal(0, 1, (30, 20))
    atoms /= np.linalg.norm(atoms, axis=0)
    targets = rng.normal(0, 1, (40, 30))
    gram = np.ascontiguousarray(atoms.T @ atoms)
    corr = np.ascontiguousarray(targets @ atoms)
    ref = _kernels._cd_lasso_ref(gram, corr, 0.05, 1e-6, 500)
    fast = _kernels.cd_lasso(gram, corr, 0.05, 1e-6, 500)
    assert np.array_equal(ref, fast)


def test_warp_paths_agree_bitwise():
    rng = np.random.default_rng(1)
    pixels = np.ascontiguousarray(rng.uniform(0, 1, (50, 70)))
    mats = rng.normal(0, 10, (6, 2, 2))
    centers = rng.uniform(0, 60, (6, 2))
    grid = (np.arange(32) + 0.5) / 32 - 0.5
    ref = _kernels._warp_ref(pixels, mats, centers, grid)
    fast = _kernels.warp_batch(pixels, mats, centers, grid)
    assert np.array_equal(ref, fast)


def test_cd_respects_sweep_budget():
    rng = np.random.default_rng(2)
    atoms = rng.normal(0, 1, (10, 8))
    atoms /= np.linalg.norm(atoms, axis=0)
    gram = np.ascontiguousarray(atoms.T @ atoms)
    corr = np.ascontiguousarray(rng.normal(0, 1, (3, 8)))
    one = _kernels.cd_lasso(gram, corr, 0.01, 0.0, 1)
    two = _kernels.cd_lasso(gram, corr, 0.01, 0.0, 2)
    assert not np.array_equal(one, two)  # tol 0 forces the full budget
