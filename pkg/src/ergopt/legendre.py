"""Grid functions and concave conjugates.

``concave_conjugate`` evaluates ``g*(x) = min_j [x y_j - g(y_j)]``, which is the
exact conjugate of the piecewise-linear interpolant of ``g`` over its grid.
The lower envelope of the lines ``x -> y_j x - g_j`` is built once (slopes
are the sorted grid nodes, so no sort is needed) and swept with the sorted
query points, giving linear time overall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, check_sorted_grid


@dataclass(frozen=True)
class GridFunction:
    """Piecewise-linear function through ``(xs[i], ys[i])``."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = check_sorted_grid("xs", self.xs)
        ys = np.asarray(self.ys, dtype=float)
        if ys.shape != xs.shape:
            raise DomainError("xs and ys must have the same shape")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        span = self.xs[-1] - self.xs[0]
        if np.any(x_arr < self.xs[0] - 1e-12 * span) or np.any(x_arr > self.xs[-1] + 1e-12 * span):
            raise DomainError(f"evaluation outside [{self.xs[0]}, {self.xs[-1]}]")
        out = np.interp(x_arr, self.xs, self.ys)
        return float(out) if np.ndim(x) == 0 else out

    def is_concave(self, tol: float = 0.0) -> bool:
        s = np.diff(self.ys) / np.diff(self.xs)
        return bool(np.all(np.diff(s) <= tol))

    def is_nondecreasing(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.ys) >= -tol))


def _lower_envelope(slopes: np.ndarray, intercepts: np.ndarray) -> tuple[list, list]:
    """Indices of lines on the lower envelope, ordered by decreasing slope, and breakpoints.

    ``slopes`` must be strictly increasing.
    """
    hull: list[int] = []
    for j in range(slopes.size - 1, -1, -1):
        m3, c3 = slopes[j], intercepts[j]
        while len(hull) >= 2:
            i1, i2 = hull[-2], hull[-1]
            m1, c1 = slopes[i1], intercepts[i1]
            m2, c2 = slopes[i2], intercepts[i2]
            # Line 2 is hidden when lines 1 and 3 cross no later than lines 1 and 2.
            if (c2 - c1) * (m2 - m3) >= (c3 - c2) * (m1 - m2):
                hull.pop()
            else:
                break
        hull.append(j)
    breaks = []
    with np.errstate(over="ignore"):
        for a, b in zip(hull[:-1], hull[1:]):
            breaks.append((intercepts[b] - intercepts[a]) / (slopes[a] - slopes[b]))
    return hull, breaks


def concave_conjugate(g: GridFunction, x_grid) -> GridFunction:
    """``x -> min_j [x * g.xs[j] - g.ys[j]]`` on ``x_grid``.

    When ``g.xs >= 0`` each line is nondecreasing, so the result is concave and
    nondecreasing.
    """
    x = check_sorted_grid("x_grid", x_grid)
    slopes = g.xs
    intercepts = -g.ys
    hull, breaks = _lower_envelope(slopes, intercepts)
    out = np.empty(x.size)
    ptr = 0
    for i, xi in enumerate(x):
        while ptr < len(breaks) and xi >= breaks[ptr]:
            ptr += 1
        j = hull[ptr]
        out[i] = slopes[j] * xi + intercepts[j]
    return GridFunction(x, out)


def conjugate_kinks(g: GridFunction) -> np.ndarray:
    """Points where the minimising line of the conjugate changes.

    These are exactly the slopes of the upper concave hull of ``g``.
    """
    _, breaks = _lower_envelope(g.xs, -g.ys)
    return np.asarray(breaks, dtype=float)
