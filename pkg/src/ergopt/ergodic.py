"""Birkhoff sums, periodic orbits and lower estimates of the maximum ergodic average."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int
from .maps import IntervalMap, eval_map, inverse_branch


def birkhoff_sum(T: IntervalMap, f, x: float, n: int) -> float:
    """``sum_{j<n} f(T^j x)`` by direct iteration, with exactly rounded summation."""
    n = check_int("n", n, lo=0)
    terms = []
    y = float(x)
    for _ in range(n):
        terms.append(float(f(y)))
        y = eval_map(T, y)
    return math.fsum(terms)


class CompensatedSum:
    """Elementwise Neumaier summation for arrays of running sums."""

    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)

    def add(self, v, mask=None):
        v = np.where(mask, v, 0.0) if mask is not None else v
        t = self.s + v
        big = np.abs(self.s) >= np.abs(v)
        self.c += np.where(big, (self.s - t) + v, (v - t) + self.s)
        self.s = t

    @property
    def value(self):
        return self.s + self.c


def birkhoff_sums(T: IntervalMap, f, xs, n: int) -> np.ndarray:
    """Vectorised ``S_n f`` for every starting point in ``xs``."""
    x = np.array(xs, dtype=float)
    acc = CompensatedSum(x.shape)
    for _ in range(check_int("n", n, lo=0)):
        acc.add(np.asarray(f(x), dtype=float))
        x = eval_map(T, x)
    return acc.value


def _canonical_words(n_symbols: int, p: int) -> np.ndarray:
    """Primitive words of length ``p`` up to rotation, excluding the constant 0 word."""
    keep = []
    for w in itertools.product(range(n_symbols), repeat=p):
        if p > 1 and all(s == 0 for s in w):
            continue
        rots = [w[i:] + w[:i] for i in range(p)]
        if w != min(rots):
            continue
        if any(p % d == 0 and w == w[:d] * (p // d) for d in range(1, p)):
            continue
        keep.append(w)
    return np.asarray(keep, dtype=np.int8).reshape(len(keep), p)


@dataclass(frozen=True)
class PeriodicOrbit:
    word: tuple
    points: np.ndarray


def periodic_orbits(T: IntervalMap, max_period: int, tol: float = 1e-15,
                    max_iter: int = 400) -> list[PeriodicOrbit]:
    """All periodic orbits with period ``<= max_period``, one per itinerary class.

    Each orbit is found as the fixed point of the composed inverse branches
    along its itinerary.  The neutral fixed point 0 is always included.
    """
    max_period = check_int("max_period", max_period, lo=1)
    out = [PeriodicOrbit((0,), np.zeros(1))]
    B = T.branch_count
    if B == 1:
        return out
    for p in range(1, max_period + 1):
        words = _canonical_words(B, p)
        if p == 1:
            words = words[words[:, 0] != 0]
        if words.size == 0:
            continue
        z = np.full(words.shape[0], 0.5)
        for _ in range(max_iter):
            y = z.copy()
            for pos in range(p - 1, -1, -1):
                sym = words[:, pos]
                nxt = np.empty_like(y)
                for b in range(B):
                    m = sym == b
                    if m.any():
                        lo, hi = T.branches[b].image
                        nxt[m] = inverse_branch(T, b, np.clip(y[m], lo, hi))
                y = nxt
            done = np.max(np.abs(y - z)) <= tol
            z = y
            if done:
                break
        pts = np.empty((words.shape[0], p))
        pts[:, 0] = z
        for i in range(1, p):
            pts[:, i] = eval_map(T, pts[:, i - 1])
        for w, row in zip(words, pts):
            out.append(PeriodicOrbit(tuple(int(s) for s in w), row))
    return out


@dataclass(frozen=True)
class MaxAverageEstimate:
    value: float
    witness: dict
    fixed_point_value: float
    best_periodic: float
    best_long_orbit: float
    details: dict = field(default_factory=dict)


def excursion_averages(T: IntervalMap, f, ns) -> tuple[np.ndarray, np.ndarray]:
    """Averages of ``f`` over the periodic orbits with itinerary ``0^n 1``.

    These orbits spend ``n`` steps on the neutral branch and one on the
    expanding branch.  The point ``x`` near 0 is found by bisection on
    ``T_0^n(x) = T_1^{-1}(x)``, where the left side is increasing in ``x``
    with slope at least 1 and the right side has slope below 1.  Returns
    the averages and the starting points.
    """
    ns = np.asarray(ns, dtype=np.int64)
    br0, br1 = T.branches[0], T.branches[1]
    lo1, hi1 = br1.image

    def forward(x0, acc=None):
        x = x0.copy()
        for j in range(int(ns.max())):
            live = (j < ns) & (x <= 1.0)
            if acc is not None:
                acc.add(np.where(j < ns, np.asarray(f(np.minimum(x, 1.0)), dtype=float), 0.0))
            with np.errstate(all="ignore"):
                x = np.where(live, br0.func(np.where(live, x, 0.0)), x)
        return x

    lo = np.zeros(ns.size)
    hi = np.full(ns.size, float(br0.hi))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = forward(mid) < inverse_branch(T, 1, np.clip(mid, lo1, hi1))
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    acc = CompensatedSum(ns.shape)
    top = forward(lo, acc)
    acc.add(np.asarray(f(np.minimum(top, 1.0)), dtype=float))
    return acc.value / (ns + 1), lo


def estimate_max_average(T: IntervalMap, f, max_period: int = 12, orbit_budget: int = 100_000,
                         seed: int = 0, orbits=None, excursion_max: int = 512) -> MaxAverageEstimate:
    """Lower estimate of ``m(f, T)``.

    The estimate is the largest of ``f(0)``, the averages of ``f`` over every
    periodic orbit of period ``<= max_period`` and empirical averages along
    seeded random orbits using ``orbit_budget`` iterations in total.  For
    two-branch maps the orbits ``0^n 1`` with ``max_period <= n <=
    excursion_max`` are added, since a potential that rises slowly away from 0
    is often maximised by a long excursion near the neutral point.
    """
    f0 = float(f(np.zeros(1))[0])
    best = f0
    witness = {"kind": "fixed_point", "point": 0.0}
    orbs = periodic_orbits(T, max_period) if orbits is None else orbits
    best_per = -math.inf
    for orb in orbs:
        avg = math.fsum(np.asarray(f(orb.points), dtype=float)) / orb.points.size
        if avg > best_per:
            best_per, best_word = avg, orb.word
        if avg > best:
            best = avg
            witness = {"kind": "periodic", "word": list(orb.word), "point": float(orb.points[0])}
    best_exc = -math.inf
    if T.in_class_J and excursion_max >= max_period:
        ns = np.arange(max_period, excursion_max + 1)
        avgs, starts = excursion_averages(T, f, ns)
        i = int(np.argmax(avgs))
        best_exc = float(avgs[i])
        if best_exc > best:
            best = best_exc
            witness = {"kind": "excursion", "n": int(ns[i]), "point": float(starts[i])}
    rng = np.random.default_rng(seed)
    n_starts = int(max(1, min(16, orbit_budget // 1000)))
    length = int(orbit_budget // n_starts)
    best_long = -math.inf
    if length > 0:
        x = rng.uniform(0.0, 1.0, n_starts)
        acc = CompensatedSum(x.shape)
        for _ in range(length):
            acc.add(np.asarray(f(x), dtype=float))
            x = eval_map(T, x)
        avgs = acc.value / length
        i = int(np.argmax(avgs))
        best_long = float(avgs[i])
        if best_long > best:
            best = best_long
            witness = {"kind": "long_orbit", "start_index": i, "length": length}
    return MaxAverageEstimate(best, witness, f0, best_per, best_long,
                              {"orbits": len(orbs), "long_orbit_starts": n_starts,
                               "best_excursion": best_exc})
