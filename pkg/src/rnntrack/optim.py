"""Limited-memory quasi-Newton minimizer and gradient-check utilities.

The search direction comes from the standard two-loop recursion over the
last `memory` curvature pairs; steps are accepted under an Armijo
sufficient-decrease test with geometric backtracking.  Curvature pairs
with non-positive s'y are discarded, which keeps the implicit Hessian
approximation positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imagery import PATCH_DIM
from .rnn import N_CLASSES, Theta


@dataclass
class OptimOptions:
    memory: int = 10
    max_iterations: int = 200
    gradient_tolerance: float = 1e-5  # infinity norm
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 30

    def __post_init__(self):
        if self.memory < 0 or self.max_iterations <= 0 or self.gradient_tolerance <= 0:
            raise ValueError("memory must be >= 0, iteration cap and tolerance positive")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ValueError("backtrack factor must be in (0, 1)")
        if self.armijo_c <= 0 or self.max_backtracks <= 0:
            raise ValueError("line-search constants must be positive")


@dataclass
class OptimReport:
    final_objective: float = np.inf
    iterations: int = 0
    gradient_norm: float = np.inf
    trace: list = field(default_factory=list)  # objective at accepted iterates
    gradient_norms: list = field(default_factory=list)
    status: str = ""

    def to_csv(self) -> str:
        lines = ["iteration,objective,grad_norm"]
        for i, (f, g) in enumerate(zip(self.trace, self.gradient_norms)):
            lines.append(f"{i},{f!r},{g!r}")
        return "\n".join(lines) + "\n"


def lbfgs_minimize(f, g, x0, opts: OptimOptions | None = None):
    """Minimize f from x0; returns (best iterate, OptimReport).

    Terminates when the gradient infinity norm drops below tolerance,
    the iteration cap is hit, or backtracking cannot find a decrease.
    """
    opts = opts or OptimOptions()
    x = np.asarray(x0, dtype=np.float64).copy()
    fx = float(f(x))
    gx = np.asarray(g(x), dtype=np.float64)
    if not np.isfinite(fx) or not np.all(np.isfinite(gx)):
        raise ValueError("objective or gradient not finite at the starting point")

    report = OptimReport(trace=[fx], gradient_norms=[float(np.abs(gx).max())])
    s_hist: list = []
    y_hist: list = []
    best_x, best_f = x.copy(), fx

    for it in range(opts.max_iterations):
        gnorm = float(np.abs(gx).max())
        if gnorm < opts.gradient_tolerance:
            report.status = "gradient tolerance reached"
            break

        d = -_two_loop(gx, s_hist, y_hist)
        gd = float(np.dot(gx, d))
        if gd >= 0:  # stale curvature produced an ascent direction
            s_hist.clear()
            y_hist.clear()
            d = -gx
            gd = float(np.dot(gx, d))

        step = min(1.0, 1.0 / (1.0 + np.abs(gx).sum())) if it == 0 and s_hist == [] else 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            x_new = x + step * d
            f_new = float(f(x_new))
            if np.isfinite(f_new) and f_new <= fx + opts.armijo_c * step * gd:
                accepted = True
                break
            step *= opts.backtrack_factor
        if not accepted:
            report.status = "line search failed"
            break

        g_new = np.asarray(g(x_new), dtype=np.float64)
        s = x_new - x
        y = g_new - gx
        ys = float(np.dot(y, s))
        if ys > 0 and opts.memory > 0:
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > opts.memory:
                s_hist.pop(0)
                y_hist.pop(0)

        x, fx, gx = x_new, f_new, g_new
        report.iterations = it + 1
        report.trace.append(fx)
        report.gradient_norms.append(float(np.abs(gx).max()))
        if fx < best_f:
            best_x, best_f = x.copy(), fx
    else:
        report.status = "iteration cap reached"

    report.final_objective = best_f
    report.gradient_norm = float(np.abs(gx).max())
    return best_x, report


def _two_loop(grad, s_hist, y_hist):
    """Implicit product of the inverse-Hessian estimate with the gradient."""
    q = grad.copy()
    if not s_hist:
        return q
    alphas = []
    rhos = [1.0 / float(np.dot(y, s)) for s, y in zip(s_hist, y_hist)]
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rhos)):
        a = rho * float(np.dot(s, q))
        alphas.append(a)
        q -= a * y
    gamma = float(np.dot(s_hist[-1], y_hist[-1]) / np.dot(y_hist[-1], y_hist[-1]))
    q *= gamma
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rhos), reversed(alphas)):
        beta = rho * float(np.dot(y, q))
        q += (a - beta) * s
    return q


def finite_diff_grad(f, x, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient, one coordinate at a time."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    probe = x.copy()
    for i in range(x.size):
        xi = x[i]
        probe[i] = xi + step
        hi = f(probe)
        probe[i] = xi - step
        lo = f(probe)
        probe[i] = xi
        out[i] = (hi - lo) / (2.0 * step)
    return out


# Flat layout: w_leaf, b_leaf, w_merge, b_merge, w_class, row-major each.

def flatten_theta(theta: Theta) -> np.ndarray:
    return np.concatenate([b.ravel() for b in theta.blocks().values()])


def flat_length(n: int) -> int:
    return n * PATCH_DIM + n + n * n + n + N_CLASSES * n


def unflatten_theta(flat, n: int) -> Theta:
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (flat_length(n),):
        raise ValueError(f"expected length {flat_length(n)} for n={n}, got {flat.shape}")
    sizes = [n * PATCH_DIM, n, n * n, n, N_CLASSES * n]
    shapes = [(n, PATCH_DIM), (n,), (n, n), (n,), (N_CLASSES, n)]
    parts = np.split(flat, np.cumsum(sizes)[:-1])
    return Theta(*(p.reshape(sh).copy() for p, sh in zip(parts, shapes)))
