"""Limited-memory BFGS with a backtracking Armijo line search."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class LineStep:
    f_old: float
    f_new: float
    step: float
    slope: float  # directional derivative g.p at the start point


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    grad_norm: float
    n_iters: int
    status: str  # "converged", "max_iters" or "line_search_failed"
    steps: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)


def two_loop(g, s_hist, y_hist):
    """Apply the L-BFGS inverse-Hessian approximation to ``g``."""
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def lbfgs(fun, x0, history=10, max_iters=100, c1=1e-4, backtrack=0.5,
          gtol=1e-6, max_backtracks=50, callback=None):
    """Minimise ``fun`` where ``fun(x) -> (value, gradient)``.

    Stops when the gradient norm drops below ``gtol``, after ``max_iters``
    iterations, or when the line search cannot find sufficient decrease within
    ``max_backtracks`` halvings (the current iterate is returned).
    """
    if history < 1:
        raise ValueError("history must be >= 1")
    x = np.array(x0, dtype=np.float64)
    f, g = fun(x)
    s_hist, y_hist = deque(maxlen=history), deque(maxlen=history)
    result = LbfgsResult(x, f, float(np.linalg.norm(g)), 0, "max_iters")
    for it in range(max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm < gtol:
            result.status = "converged"
            break
        p = -two_loop(g, list(s_hist), list(y_hist))
        slope = float(g @ p)
        if slope >= 0:
            # lost descent, fall back to steepest descent
            s_hist.clear()
            y_hist.clear()
            p = -g
            slope = -gnorm * gnorm
        t = 1.0 if s_hist else min(1.0, 1.0 / gnorm)
        for _ in range(max_backtracks):
            x_new = x + t * p
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + c1 * t * slope:
                break
            t *= backtrack
        else:
            log.warning("line search failed after %d backtracks at iteration %d", max_backtracks, it)
            result.status = "line_search_failed"
            break
        result.steps.append(LineStep(f, f_new, t, slope))
        s, y = x_new - x, g_new - g
        if y @ s > 1e-10 * (s @ s):
            s_hist.append(s)
            y_hist.append(y)
        x, f, g = x_new, f_new, g_new
        result.n_iters = it + 1
        result.trajectory.append(f)
        if callback is not None:
            callback(it, x, f)
    else:
        if np.linalg.norm(g) < gtol:
            result.status = "converged"
    result.x, result.f, result.grad_norm = x, f, float(np.linalg.norm(g))
    return result
