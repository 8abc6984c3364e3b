"""One-dimensional minimisation helpers: coarse grid followed by bounded Brent search."""

from __future__ import annotations

import math
from typing import Callable, Tuple

import numpy as np
from scipy import optimize


def bounded_minimum(f: Callable[[float], float], a: float, b: float,
                    tol: float = 1e-6) -> Tuple[float, float]:
    """Bounded scalar minimisation on ``[a, b]``.

    Returns the best point actually evaluated and its value, so the result
    stays meaningful when ``f`` is only piecewise smooth.
    """
    if b < a:
        a, b = b, a
    if b - a <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    best = [math.nan, math.inf]

    def tracked(x):
        fx = f(x)
        if fx < best[1]:
            best[0], best[1] = float(x), fx
        return fx

    optimize.minimize_scalar(tracked, bounds=(a, b), method="bounded",
                             options={"xatol": tol, "maxiter": 500})
    return best[0], best[1]


def refine_grid_minimum(f: Callable[[float], float], grid: np.ndarray, values: np.ndarray,
                        lo_limit: float, hi_limit: float,
                        tol: float = 1e-6) -> Tuple[float, float]:
    """Bounded search between the neighbours of the best grid point.

    ``lo_limit``/``hi_limit`` bound the bracket when the best point sits at
    either end of the grid.  Never returns anything worse than the grid.
    """
    finite = np.where(np.isfinite(values), values, np.inf)
    i = int(np.argmin(finite))
    best = (float(grid[i]), float(finite[i]))
    if not math.isfinite(best[1]):
        return best
    lo = grid[i - 1] if i > 0 else lo_limit
    hi = grid[i + 1] if i + 1 < len(grid) else hi_limit
    if hi - lo > tol:
        x, fx = bounded_minimum(f, float(lo), float(hi), tol)
        if fx < best[1]:
            best = (x, fx)
    return best
