"""Moduli of continuity and their numerical certification."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import ParameterError, check_int, check_real


@dataclass(frozen=True)
class Modulus:
    """A modulus of continuity ``omega: [0, inf) -> [0, inf)`` with ``omega(0) = 0``."""

    func: Callable
    name: str
    h0: float = math.inf
    params: dict | None = None

    def __call__(self, h):
        h_arr = np.asarray(h, dtype=float)
        out = self.func(h_arr)
        return float(out) if np.ndim(h) == 0 else out


def make_omega_alpha_beta(alpha: float, beta: float) -> Modulus:
    """``h^alpha (-log h)^(-beta)`` below its concavity threshold, constant above.

    Admissible ranges: ``0 <= alpha < 1`` with ``beta >= 0`` and ``alpha + beta > 0``,
    or ``0 < alpha <= 1`` with ``beta = 0``.
    """
    alpha = check_real("alpha", alpha, lo=0, hi=1)
    beta = check_real("beta", beta, lo=0)
    if alpha + beta <= 0:
        raise ParameterError("alpha + beta must be > 0")
    if alpha == 1.0 and beta > 0:
        raise ParameterError("alpha = 1 requires beta = 0")

    def raw(h):
        with np.errstate(divide="ignore", invalid="ignore"):
            return h ** alpha * (-np.log(h)) ** (-beta)

    h0 = 1.0 if beta == 0 else _concavity_threshold(raw)
    top = float(raw(np.float64(h0))) if beta > 0 else 1.0

    def func(h):
        with np.errstate(divide="ignore", invalid="ignore"):
            if beta == 0:
                val = np.minimum(h, 1.0) ** alpha
            else:
                val = np.where((h > 0) & (h < h0), raw(np.where(h > 0, h, 0.5)), top)
        return np.where(h > 0, val, 0.0)

    return Modulus(func, f"omega_alpha_beta({alpha}, {beta})", h0, {"alpha": alpha, "beta": beta})


def _is_concave_at(f, h: float, eps: float = 1e-4) -> bool:
    a, b = h * (1 - eps), h * (1 + eps)
    return (f(h) - f(a)) / (h - a) >= (f(b) - f(h)) / (b - h)


def _concavity_threshold(f) -> float:
    """Largest ``h0 < 1`` such that ``f`` is concave on ``(0, h0]``.

    A sign scan of the discrete second difference on a log grid locates the
    first change; bisection then refines it.
    """
    hs = np.geomspace(1e-300, 1 - 1e-9, 10_000)
    with np.errstate(all="ignore"):
        fv = f(hs)
    slopes = np.diff(fv) / np.diff(hs)
    bad = np.nonzero(np.diff(slopes) > 0)[0]
    if bad.size == 0:
        return float(hs[-1])
    i = int(bad[0])
    lo, hi = float(hs[max(i - 1, 0)]), float(hs[min(i + 2, hs.size - 1)])
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if _is_concave_at(f, mid):
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < 1e-13:
            break
    return lo


def make_omega_log(k: float) -> Modulus:
    """``h (k log(1/h) + 1)`` near 0, continued linearly past its maximum slope point.

    The threshold is ``min(1, exp(1/k - 1))``; beyond it the modulus grows with
    the slope it has there, which keeps it concave and nondecreasing.
    """
    k = check_real("k", k, lo=1)
    ht = min(1.0, math.exp(1.0 / k - 1.0))
    ft = ht * (k * math.log(1.0 / ht) + 1.0)
    slope = k * math.log(1.0 / ht) + 1.0 - k

    def func(h):
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = h * (k * np.log(1.0 / np.where(h > 0, h, 1.0)) + 1.0)
            val = np.where(h <= ht, inner, ft + slope * (h - ht))
        return np.where(h > 0, val, 0.0)

    return Modulus(func, f"omega_log({k})", ht, {"k": k})


def compose(outer: Modulus, inner: Modulus) -> Modulus:
    """``outer o inner``, again a modulus."""
    return Modulus(lambda h: outer.func(inner.func(h)), f"{outer.name}o{inner.name}")


@dataclass(frozen=True)
class ModulusCertificate:
    nondecreasing: float
    concave: float
    subadditive: float
    sandwich: float
    tol: float = 1e-12

    @property
    def flags(self) -> dict:
        return {k: getattr(self, k) >= -self.tol
                for k in ("nondecreasing", "concave", "subadditive", "sandwich")}

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


def sandwich_slack(omega: Modulus, h, chi):
    """Smaller of the two slacks in ``chi/(1+chi) w(h) <= w(chi h) <= (chi+1) w(h)``.

    Both sides are scaled by ``w(h)`` so the result is relative.
    """
    h = np.asarray(h, dtype=float)
    chi = np.asarray(chi, dtype=float)
    wh = omega(h)
    wc = omega(chi * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = (wc - chi / (1 + chi) * wh) / wh
        upper = ((chi + 1) * wh - wc) / wh
    return np.minimum(lower, upper)


def check_modulus(omega: Modulus, grid, chis=(0.1, 0.5, 2.0, 10.0), n_pairs: int = 2000,
                  seed: int = 0, tol: float = 1e-12) -> ModulusCertificate:
    """Numerically certify the modulus axioms on ``grid``.

    Each field of the result is the worst slack found; nonnegative (up to
    ``tol``) means the property held on every sample.
    """
    h = np.asarray(grid, dtype=float)
    h = np.unique(h[h > 0])
    w = omega(h)
    scale = max(1.0, float(np.max(np.abs(w))))
    mono = float(np.min(np.diff(w))) / scale if h.size > 1 else 0.0
    if h.size > 2:
        s = np.diff(w) / np.diff(h)
        # Relative slope drop; rounding in w limits how small a violation is meaningful.
        noise = 4e-16 * np.maximum(np.abs(w[1:-1]), 1e-300) / np.minimum(np.diff(h)[:-1], np.diff(h)[1:])
        conc = float(np.min((s[:-1] - s[1:] + noise) / np.maximum(np.abs(s[:-1]), 1e-300)))
    else:
        conc = 0.0
    rng = np.random.default_rng(seed)
    a = rng.choice(h, n_pairs)
    b = rng.choice(h, n_pairs)
    wa, wb, wab = omega(a), omega(b), omega(a + b)
    sub = float(np.min((wa + wb - wab) / np.maximum(wab, 1e-300)))
    sand = min(float(np.min(sandwich_slack(omega, h, c))) for c in chis)
    return ModulusCertificate(mono, conc, sub, sand, tol)


LIMINF_TAGS = ("ObstructionRegime", "VanishingRatio", "Inconclusive")


@dataclass(frozen=True)
class LiminfReport:
    xs: np.ndarray
    ratios: np.ndarray
    tag: str


def liminf_ratio(omega: Modulus, V, decades: int = 300, radius: float | None = None) -> LiminfReport:
    """Tabulate ``omega(x) / V(x)`` at ``x = r 10^-j`` and classify its liminf at 0.

    ``ObstructionRegime`` means the ratio stays bounded below along the table,
    ``VanishingRatio`` that it decays steadily, ``Inconclusive`` anything else
    (including underflow before three usable levels).
    """
    decades = check_int("decades", decades, lo=2)
    r = float(V.valid_radius if radius is None else radius)
    xs = r * 10.0 ** -np.arange(decades + 1, dtype=float)
    with np.errstate(all="ignore"):
        vals = np.array([float(V(x)) for x in xs])
        ratios = omega(xs) / vals
    ok = np.isfinite(ratios) & (ratios > 0) & (xs > 0)
    stop = int(np.argmin(ok)) if not ok.all() else ok.size
    xs, ratios = xs[:stop], ratios[:stop]
    if ratios.size < 3:
        return LiminfReport(xs, ratios, "Inconclusive")
    tail = ratios[-3:]
    half = ratios[ratios.size // 2:]
    if tail[2] >= tail[1] >= tail[0]:
        tag = "ObstructionRegime"
    elif tail.max() <= 1.2 * tail.min() and half.min() >= 0.8 * half.max():
        tag = "ObstructionRegime"
    elif tail[2] < tail[1] < tail[0] and half[-1] < 0.8 * half[0]:
        tag = "VanishingRatio"
    else:
        tag = "Inconclusive"
    return LiminfReport(xs, ratios, tag)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    finite: bool
    pairs: int


def modulus_norm(xs, fx, omega: Modulus, n_random: int = 20_000, seed: int = 0) -> NormEstimate:
    """Lower estimate of ``sup |f(x) - f(y)| / omega(|x - y|)`` from samples.

    Pairs are adjacent samples, samples at every dyadic stride and a seeded
    random set.  ``finite`` is ``False`` when a pair with ``omega = 0`` and
    distinct values appears, or the quotient overflows.
    """
    x = np.asarray(xs, dtype=float)
    f = np.asarray(fx, dtype=float)
    order = np.argsort(x)
    x, f = x[order], f[order]
    n = x.size
    if n < 2:
        return NormEstimate(0.0, True, 0)
    idx_a, idx_b = [], []
    stride = 1
    while stride < n:
        i = np.arange(n - stride)
        idx_a.append(i)
        idx_b.append(i + stride)
        stride *= 2
    rng = np.random.default_rng(seed)
    idx_a.append(rng.integers(0, n, n_random))
    idx_b.append(rng.integers(0, n, n_random))
    a = np.concatenate(idx_a)
    b = np.concatenate(idx_b)
    keep = a != b
    a, b = a[keep], b[keep]
    num = np.abs(f[a] - f[b])
    den = omega(np.abs(x[a] - x[b]))
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(num > 0, num / den, 0.0)
    value = float(np.max(q)) if q.size else 0.0
    return NormEstimate(value, bool(np.isfinite(value)), int(a.size))


@dataclass(frozen=True)
class KernelPotential:
    """``f(x) = sum_i a_i omega(|x - c_i|)``; ``norm_bound = sum |a_i|`` bounds ``|f|_omega``."""

    omega: Modulus
    centers: np.ndarray
    weights: np.ndarray

    @property
    def norm_bound(self) -> float:
        return float(np.abs(self.weights).sum())

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = np.zeros(x_arr.shape)
        for c, a in zip(self.centers, self.weights):
            out = out + a * self.omega(np.abs(x_arr - c))
        return float(out) if np.ndim(x) == 0 else out


def random_kernel_potential(omega: Modulus, terms: int, rng: np.random.Generator) -> KernelPotential:
    """Centers uniform on [0, 1], weights standard normal."""
    terms = check_int("terms", terms, lo=1)
    c = rng.uniform(0.0, 1.0, terms)
    a = rng.normal(size=terms)
    return KernelPotential(omega, c, a)
