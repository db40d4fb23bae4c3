import numpy as np
import pytest

from rnntrack.optim import (OptimOptions, finite_diff_grad, flat_length,
                            flatten_theta, lbfgs_minimize, unflatten_theta)
from rnntrack.rnn import Theta, init_theta


def quadratic_problem(seed, dim=12):
    rng = np.random.default_rng(seed)
    m = rng.normal(0, 1, (dim, dim))
    a = m.T @ m + np.eye(dim)
    b = rng.normal(0, 1, dim)
    f = lambda x: 0.5 * x @ a @ x - b @ x
    g = lambda x: a @ x - b
    return f, g, np.linalg.solve(a, b)


class TestLbfgs:
    def test_scalar_parabola(self):
        x, report = lbfgs_minimize(lambda x: (x[0] - 1.0) ** 2,
                                   lambda x: np.array([2.0 * (x[0] - 1.0)]),
                                   np.array([5.0]))
        assert abs(x[0] - 1.0) < 1e-8
        assert report.status == "gradient tolerance reached"

    def test_rosenbrock(self):
        def f(x):
            return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2

        def g(x):
            return np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2),
                             200 * (x[1] - x[0] ** 2)])

        x, report = lbfgs_minimize(f, g, np.array([-1.2, 1.0]),
                                   OptimOptions(max_iterations=500, gradient_tolerance=1e-9))
        assert np.abs(x - 1.0).max() < 1e-6

    def test_quadratic_matches_linear_solve(self):
        for seed in range(3):
            f, g, x_star = quadratic_problem(seed)
            x, _ = lbfgs_minimize(f, g, np.zeros_like(x_star),
                                  OptimOptions(gradient_tolerance=1e-10))
            assert np.abs(x - x_star).max() < 1e-6

    def test_zero_memory_still_converges(self):
        f, g, x_star = quadratic_problem(7, dim=6)
        x, _ = lbfgs_minimize(f, g, np.zeros_like(x_star),
                              OptimOptions(memory=0, max_iterations=2000,
                                           gradient_tolerance=1e-9))
        assert np.abs(x - x_star).max() < 1e-5

    def test_trace_non_increasing(self):
        f, g, _ = quadratic_problem(3)
        _, report = lbfgs_minimize(f, g, np.ones(12))
        diffs = np.diff(report.trace)
        assert np.all(diffs <= 1e-12)

    def test_deterministic(self):
        f, g, _ = quadratic_problem(5)
        x1, r1 = lbfgs_minimize(f, g, np.ones(12))
        x2, r2 = lbfgs_minimize(f, g, np.ones(12))
        assert np.array_equal(x1, x2)
        assert r1.trace == r2.trace

    def test_nonfinite_start_rejected(self):
        with pytest.raises(ValueError):
            lbfgs_minimize(lambda x: np.inf, lambda x: x, np.zeros(2))

    def test_linesearch_failure_at_start_returns_x0(self):
        # deliberately inconsistent gradient makes every direction ascend
        f = lambda x: float(x @ x)
        g = lambda x: -2.0 * x  # wrong sign
        x0 = np.array([1.0, -2.0])
        x, report = lbfgs_minimize(f, g, x0)
        assert np.array_equal(x, x0)
        assert report.status == "line search failed"
        assert report.iterations == 0

    def test_report_csv(self):
        f, g, _ = quadratic_problem(5)
        _, report = lbfgs_minimize(f, g, np.ones(12))
        csv = report.to_csv()
        lines = csv.strip().splitlines()
        assert lines[0] == "iteration,objective,grad_norm"
        assert len(lines) == len(report.trace) + 1


class TestFiniteDiff:
    def test_half_square_norm(self):
        x = np.array([0.3, -1.2, 2.0])
        fd = finite_diff_grad(lambda v: 0.5 * float(v @ v), x, 1e-5)
        assert np.abs(fd - x).max() < 1e-9

    def test_linear_function_exact(self):
        c = np.array([2.0, -3.0, 0.5, 1.25])
        fd = finite_diff_grad(lambda v: float(c @ v), np.zeros(4), 1e-5)
        assert np.abs(fd - c).max() < 1e-9

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda v: 0.0, np.zeros(2), 0.0)


class TestFlatten:
    def test_round_trip_bit_identical(self):
        theta = init_theta(6, 3)
        back = unflatten_theta(flatten_theta(theta), 6)
        for name, block in theta.blocks().items():
            assert np.array_equal(block, getattr(back, name))

    def test_flat_length_stock_dimension(self):
        assert flat_length(50) == 15500
        assert flatten_theta(init_theta(50, 0)).shape == (15500,)

    def test_flat_length_minimal(self):
        assert flat_length(1) == 261

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            unflatten_theta(np.zeros(100), 6)

    def test_layout_order(self):
        t = Theta.zeros(2)
        t.w_leaf[0, 0] = 1.0
        t.b_leaf[1] = 2.0
        t.w_merge[1, 1] = 3.0
        t.b_merge[0] = 4.0
        t.w_class[1, 0] = 5.0
        flat = flatten_theta(t)
        assert flat[0] == 1.0
        assert flat[2 * 256 + 1] == 2.0
        assert flat[2 * 256 + 2 + 3] == 3.0
        assert flat[2 * 256 + 2 + 4] == 4.0
        assert flat[2 * 256 + 2 + 4 + 2 + 2] == 5.0
