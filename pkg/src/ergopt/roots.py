"""Bracketed root finding for monotone functions.

Newton steps are taken when a derivative is supplied and the step stays inside
the current bracket; otherwise the bracket is bisected.  Both a scalar path
(plain floats, used in long orbit loops) and a vectorised path are provided.
"""

from __future__ import annotations

import numpy as np

RTOL = 1e-15
MAX_ITER = 200


def solve_increasing_scalar(F, a: float, b: float, dF=None, x0=None,
                            rtol: float = RTOL, max_iter: int = MAX_ITER) -> float:
    """Root of an increasing ``F`` on ``[a, b]`` with ``F(a) <= 0 <= F(b)``."""
    x = 0.5 * (a + b) if x0 is None or not a < x0 < b else x0
    for _ in range(max_iter):
        fx = F(x)
        if fx == 0.0:
            return x
        if fx < 0.0:
            a = x
        else:
            b = x
        if dF is not None:
            d = dF(x)
            xn = x - fx / d if d > 0 else 0.5 * (a + b)
            if not a < xn < b:
                xn = 0.5 * (a + b)
        else:
            xn = 0.5 * (a + b)
        if abs(xn - x) <= rtol * abs(xn) or b - a <= rtol * abs(b) or xn == x:
            return xn
        x = xn
    return x


def solve_increasing(F, a, b, dF=None, x0=None,
                     rtol: float = RTOL, max_iter: int = MAX_ITER) -> np.ndarray:
    """Vectorised counterpart of :func:`solve_increasing_scalar`.

    ``F`` and ``dF`` act elementwise on arrays; ``a`` and ``b`` broadcast
    against each other and define one bracket per root.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    a = a.copy()
    b = b.copy()
    x = 0.5 * (a + b) if x0 is None else np.clip(np.asarray(x0, dtype=float), a, b)
    x = np.array(x, dtype=float)
    active = np.ones(x.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            fx = F(x)
            hit = fx == 0.0
            low = fx < 0.0
            a = np.where(active & low, x, a)
            b = np.where(active & ~low & ~hit, x, b)
            mid = 0.5 * (a + b)
            if dF is not None:
                d = dF(x)
                xn = x - fx / d
                ok = (d > 0) & (xn > a) & (xn < b)
                xn = np.where(ok, xn, mid)
            else:
                xn = mid
            xn = np.where(hit, x, xn)
            done = hit | (np.abs(xn - x) <= rtol * np.abs(xn)) | (b - a <= rtol * np.abs(b)) | (xn == x)
            x = np.where(active, xn, x)
            active &= ~done
            if not active.any():
                break
    return x
