"""Independent reference computations used to freeze and cross-check values.

Nothing here imports the library's numerical routines except map evaluation
and branch inversion, which the oracles need as primitives.
"""

from __future__ import annotations

import math

import numpy as np

from ergopt.maps import inverse_branch


def farey_g_orbit(n):
    """Closed-form orbit of 1/2 under x / (1 + x): w_n = 1 / (n + 2)."""
    return 1.0 / (np.asarray(n, dtype=float) + 2.0)


def necklace_count(p: int, symbols: int = 2) -> int:
    """Number of primitive periodic orbits of exact period p of the full shift (Moebius)."""
    def mobius(n):
        out, m, q = 1, n, 2
        while q * q <= m:
            if m % q == 0:
                m //= q
                if m % q == 0:
                    return 0
                out = -out
            q += 1
        return -out if m > 1 else out

    return sum(mobius(d) * symbols ** (p // d) for d in range(1, p + 1) if p % d == 0) // p


def concavity_threshold(alpha: float, beta: float) -> float:
    """First h at which h^a (-log h)^-b stops being concave, from the quadratic in u = 1/(-log h).

    Writing the second derivative as omega / h^2 * Q(u) with
    Q(u) = a(a-1) + (2a-1) b u + b(b+1) u^2, concavity holds while Q <= 0, so
    h0 = exp(-1/u*) with u* the positive root of Q.
    """
    a, b = alpha, beta
    A, B, C = b * (b + 1), (2 * a - 1) * b, a * (a - 1)
    u = (-B + math.sqrt(B * B - 4 * A * C)) / (2 * A)
    return math.exp(-1.0 / u)


def upper_hull_values(xs, ys):
    """Upper concave hull of the points (xs, ys), evaluated at xs (monotone chain)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    hull = []
    for i in range(xs.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(xs, xs[hull], ys[hull])


def brute_conjugate(ys_grid, g_vals, x):
    """min over the sample points of x*y - g(y), by full enumeration."""
    y = np.asarray(ys_grid, dtype=float)
    g = np.asarray(g_vals, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.min(x[:, None] * y[None, :] - g[None, :], axis=1)


def preimage_tree_sup(T, f, m: float, xs, depth: int):
    """max over 0 <= j <= depth of the sup of S_j(f - m)(y) over all y with T^j(y) = x.

    Enumerates every inverse-branch word, 2^j preimages at level j.
    """
    xs = np.asarray(xs, dtype=float)
    best = np.zeros(xs.size)
    pts = xs[:, None]
    sums = np.zeros((xs.size, 1))
    for _ in range(depth):
        new_pts, new_sums = [], []
        for b in range(T.branch_count):
            lo, hi = T.branches[b].image
            ok = (pts >= lo - 1e-15) & (pts <= hi + 1e-15)
            y = np.where(ok, pts, lo)
            pre = inverse_branch(T, b, np.clip(y.ravel(), lo, hi)).reshape(y.shape)
            val = np.where(ok, sums + np.asarray(f(pre), dtype=float) - m, -np.inf)
            new_pts.append(pre)
            new_sums.append(val)
        pts = np.concatenate(new_pts, axis=1)
        sums = np.concatenate(new_sums, axis=1)
        best = np.maximum(best, sums.max(axis=1))
    return best


def counting_constants(C0, sigma, gamma):
    """Counting constants written out term by term."""
    e = 1.0 + 1.0 / sigma
    c1 = 0.25 * (1.0 / C0 - 1.0 / C0 ** 2) * sigma ** e
    c1p = 0.5 * c1 / (C0 ** (sigma + 1) * sigma ** ((sigma + 1) ** 2 / sigma)) \
        * (1 - gamma) ** (sigma + 1) * gamma ** e
    c1pp = (2 * (1 - gamma) * C0 / (sigma * gamma ** e)) ** (-sigma)
    return {"C1": c1, "C1p": c1p, "C1pp": c1pp, "C2": c1p * c1pp}
