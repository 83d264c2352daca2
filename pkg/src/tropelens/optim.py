"""Limited-memory BFGS with a strong-Wolfe line search."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    n_iter: int
    converged: bool
    message: str


def _zoom(fun, x, d, f0, dg0, lo, hi, f_lo, dg_lo, c1, c2, noise=0.0, max_steps=40):
    """Shrink ``[lo, hi]`` until a step satisfying strong Wolfe is found."""
    for _ in range(max_steps):
        # safeguarded cubic step would be nicer; bisection keeps it predictable
        a = 0.5 * (lo + hi)
        f, g = fun(x + a * d)
        dg = float(g @ d)
        if f > f0 + c1 * a * dg0 + noise or f >= f_lo + noise:
            hi = a
        else:
            if abs(dg) <= -c2 * dg0:
                return a, f, g
            if dg * (hi - lo) >= 0:
                hi = lo
            lo, f_lo, dg_lo = a, f, dg
        if abs(hi - lo) < 1e-16:
            break
    f, g = fun(x + lo * d)
    return lo, f, g


def wolfe_line_search(fun: Objective, x, d, f0, g0, a1=1.0, c1=1e-4, c2=0.9, a_max=1e10, max_steps=30):
    dg0 = float(g0 @ d)
    # near the optimum the predicted decrease can fall below the rounding
    # error of f itself; changes that small count as sufficient decrease
    noise = 4.0 * np.finfo(np.float64).eps * abs(f0)
    a_prev, f_prev, dg_prev = 0.0, f0, dg0
    a = a1
    for i in range(max_steps):
        f, g = fun(x + a * d)
        dg = float(g @ d)
        if f > f0 + c1 * a * dg0 + noise or (i > 0 and f >= f_prev + noise):
            return _zoom(fun, x, d, f0, dg0, a_prev, a, f_prev, dg_prev, c1, c2, noise)
        if abs(dg) <= -c2 * dg0:
            return a, f, g
        if dg >= 0:
            return _zoom(fun, x, d, f0, dg0, a, a_prev, f, dg, c1, c2, noise)
        a_prev, f_prev, dg_prev = a, f, dg
        a = min(2.0 * a, a_max)
    return a, f, g


def lbfgs(fun: Objective, x0: np.ndarray, memory: int = 10, gtol: float = 1e-6, max_iter: int = 500) -> OptimizeResult:
    """Minimise ``fun`` (returning value and gradient) until ``max|grad| <= gtol``."""
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fun(x)
    s_hist: deque = deque(maxlen=memory)
    y_hist: deque = deque(maxlen=memory)
    rho_hist: deque = deque(maxlen=memory)

    for it in range(max_iter):
        if np.max(np.abs(g)) <= gtol:
            return OptimizeResult(x, f, g, it, True, "gradient tolerance reached")

        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        if s_hist:
            gamma = float(s_hist[-1] @ y_hist[-1]) / float(y_hist[-1] @ y_hist[-1])
        else:
            gamma = 1.0 / max(np.linalg.norm(g), 1.0)
        r = gamma * q
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * float(y @ r)
            r += (a - b) * s
        d = -r
        if float(g @ d) >= 0:
            s_hist.clear(), y_hist.clear(), rho_hist.clear()
            d = -g / max(np.linalg.norm(g), 1.0)

        step, f_new, g_new = wolfe_line_search(fun, x, d, f, g)
        if step == 0.0:
            return OptimizeResult(x, f, g, it, np.max(np.abs(g)) <= gtol, "line search failed to make progress")
        s = step * d
        y = g_new - g
        sy = float(s @ y)
        x = x + s
        f, g = f_new, g_new
        if sy > 1e-12 * float(y @ y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)

    converged = bool(np.max(np.abs(g)) <= gtol)
    return OptimizeResult(x, f, g, max_iter, converged, "maximum iterations reached")
