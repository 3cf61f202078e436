"""Dense BFGS with a strong-Wolfe line search."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

FunGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


class LineSearchFailure(RuntimeError):
    pass


@dataclass
class BfgsResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    message: str = ""
    evaluations: int = 0


def _interpolate(a_lo, f_lo, g_lo, a_hi, f_hi):
    """Minimizer of the quadratic through (a_lo, f_lo, g_lo) and (a_hi, f_hi), safeguarded."""
    d = a_hi - a_lo
    denom = 2 * (f_hi - f_lo - g_lo * d)
    if denom > 0:
        a = a_lo - g_lo * d * d / denom
        lo, hi = sorted((a_lo, a_hi))
        margin = 0.1 * (hi - lo)
        if lo + margin <= a <= hi - margin:
            return a
    return 0.5 * (a_lo + a_hi)


def wolfe_line_search(fg: FunGrad, x: np.ndarray, f0: float, g0: np.ndarray, p: np.ndarray,
                      c1: float = 1e-4, c2: float = 0.9, a_init: float = 1.0, a_max: float = 50.0,
                      max_evals: int = 30):
    """Step length satisfying sufficient decrease and the strong curvature condition.

    Returns ``(alpha, f, g, evaluations)``; raises :class:`LineSearchFailure`.
    """
    d0 = float(g0 @ p)
    if d0 >= 0:
        raise LineSearchFailure("not a descent direction")
    evals = 0

    def phi(a):
        nonlocal evals
        evals += 1
        f, g = fg(x + a * p)
        return f, g, float(g @ p)

    def zoom(a_lo, f_lo, d_lo, g_lo_vec, a_hi, f_hi):
        while evals < max_evals:
            a = _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi)
            f, g, d = phi(a)
            if not np.isfinite(f) or f > f0 + c1 * a * d0 or f >= f_lo:
                a_hi, f_hi = a, f
            else:
                if abs(d) <= -c2 * d0:
                    return a, f, g
                if d * (a_hi - a_lo) >= 0:
                    a_hi, f_hi = a_lo, f_lo
                a_lo, f_lo, d_lo, g_lo_vec = a, f, d, g
            if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
                break
        # fall back to the best sufficient-decrease point found
        if a_lo > 0:
            return a_lo, f_lo, g_lo_vec
        raise LineSearchFailure("zoom did not find an acceptable step")

    a_prev, f_prev, d_prev, g_prev = 0.0, f0, d0, g0
    a = a_init
    while evals < max_evals:
        f, g, d = phi(a)
        if not np.isfinite(f) or f > f0 + c1 * a * d0 or (a_prev > 0 and f >= f_prev):
            return (*zoom(a_prev, f_prev, d_prev, g_prev, a, f), evals)
        if abs(d) <= -c2 * d0:
            return a, f, g, evals
        if d >= 0:
            return (*zoom(a, f, d, g, a_prev, f_prev), evals)
        a_prev, f_prev, d_prev, g_prev = a, f, d, g
        a = min(2 * a, a_max)
        if a_prev >= a_max:
            return a_prev, f_prev, g_prev, evals
    raise LineSearchFailure("line search exceeded its evaluation budget")


def minimize_bfgs(fg: FunGrad, x0, max_iterations: int = 500, gtol: float = 1e-8, ftol: float = 1e-12,
                  callback: Callable[[np.ndarray, float], None] | None = None) -> BfgsResult:
    """Minimize ``f`` given ``fg(x) -> (f, grad)``.

    Stops on ``max|grad| < gtol``, an accepted cost change below ``ftol``, or
    ``max_iterations``.  A failed line search resets the inverse Hessian to
    the identity and retries along steepest descent once before giving up.
    """
    x = np.array(x0, dtype=float)
    f, g = fg(x)
    evals = 1
    history = [float(f)]
    res = BfgsResult(x.copy(), float(f), g.copy(), history, 0, False, "max_iterations", evals)
    if max_iterations <= 0:
        res.message = "no iterations requested"
        return res
    dim = len(x)
    H = np.eye(dim)
    fresh = True
    for it in range(1, max_iterations + 1):
        if np.max(np.abs(g), initial=0.0) < gtol:
            res.converged, res.message = True, "gradient tolerance"
            res.iterations = it - 1
            break
        p = -H @ g
        if g @ p >= 0:
            H, fresh = np.eye(dim), True
            p = -g
        try:
            a, f_new, g_new, n_ev = wolfe_line_search(fg, x, f, g, p)
        except LineSearchFailure:
            evals += 30
            if fresh:
                res.message = "line search failed along steepest descent"
                res.iterations = it - 1
                break
            H, fresh = np.eye(dim), True
            try:
                a, f_new, g_new, n_ev = wolfe_line_search(fg, x, f, g, -g)
                p = -g
            except LineSearchFailure:
                res.message = "line search failed along steepest descent"
                res.iterations = it - 1
                break
        evals += n_ev
        s = a * p
        y = g_new - g
        x = x + s
        df = f - f_new
        f, g = float(f_new), g_new
        history.append(f)
        res.iterations = it
        if callback is not None:
            callback(x, f)
        sy = float(s @ y)
        if sy > 1e-14 * np.linalg.norm(s) * np.linalg.norm(y):
            if fresh:
                H = np.eye(dim) * (sy / float(y @ y))
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s)
            fresh = False
        if abs(df) < ftol:
            res.converged, res.message = True, "cost change below tolerance"
            break
    else:
        if np.max(np.abs(g), initial=0.0) < gtol:
            res.converged, res.message = True, "gradient tolerance"
    res.x, res.fun, res.grad, res.evaluations = x, f, g, evals
    return res
