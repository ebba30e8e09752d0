"""Intermittent interval maps with a neutral fixed point at 0.

Every map is stored as a list of monotone branches.  Branch 0 is the neutral
branch ``x -> x (1 + V(x))`` (orientation ``AWAY``) or ``x -> x (1 - V(x))``
(orientation ``TOWARD``), where ``V`` is regularly varying at 0.

Families
--------
``"mp"``          x (1 + x^s) mod 1, two increasing full branches.
``"mp-inverse"``  the inverse of the first ``"mp"`` branch, one branch on [0, 1].
``"farey"``       x / (1 - x^r)^(1/r) on the left, (1 - x^r)^(1/r) / x on the right.
``"farey-g"``     x / (1 + x^r)^(1/r), one branch on [0, 1].
``"h"``           Farey left branch with an affine full right branch.
``"log"``         x + c x^(1+tau) |log x|^(1+theta) on [0, 1/2], 2x - 1 on the right.
``"custom"``      user supplied ``V`` and optional right branch.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import DomainError, ParameterError, check_int, check_real
from .roots import solve_increasing, solve_increasing_scalar


log = logging.getLogger(__name__)


FAMILIES = ("mp", "mp-inverse", "farey", "farey-g", "h", "log", "custom")


class Orientation(enum.Enum):
    AWAY = "away"
    TOWARD = "toward"


@dataclass(frozen=True)
class RegVaryingFn:
    """A regularly varying function at 0 with index ``sigma``.

    ``func`` must accept floats and numpy arrays.  ``inverse`` is optional and
    is used by :func:`ergopt.orbits.scale_b` when present.
    """

    sigma: float
    func: Callable
    valid_radius: float
    name: str = ""
    inverse: Optional[Callable] = None

    def __call__(self, x):
        return self.func(x)

    def invert(self, v):
        """Solve ``V(u) = v`` for ``u`` in ``(0, valid_radius]``."""
        v = np.asarray(v, dtype=float)
        top = float(self.func(self.valid_radius))
        if np.any(v <= 0) or np.any(v > top * (1 + 1e-12)):
            raise DomainError(f"V^-1 needs 0 < v <= V(valid_radius) = {top}")
        if self.inverse is not None:
            return np.asarray(self.inverse(v), dtype=float)
        # V increases on (0, r]; bracket in log u keeps tiny roots accurate.
        lo = np.full(v.shape, -745.0)
        hi = np.full(v.shape, math.log(self.valid_radius))
        logu = solve_increasing(lambda t: self.func(np.exp(t)) - v, lo, hi)
        return np.exp(logu)


@dataclass(frozen=True)
class Branch:
    lo: float
    hi: float
    func: Callable
    deriv: Optional[Callable] = None
    inverse: Optional[Callable] = None
    increasing: bool = True

    @property
    def image(self) -> tuple[float, float]:
        a, b = float(self.func(self.lo)), float(self.func(self.hi))
        return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class IntervalMap:
    family: str
    params: dict
    orientation: Orientation
    V: RegVaryingFn
    branches: tuple
    cut: Optional[float] = None
    lam: Optional[float] = None
    notes: tuple = field(default_factory=tuple)

    @property
    def sigma(self) -> float:
        return self.V.sigma

    @property
    def branch_count(self) -> int:
        return len(self.branches)

    @property
    def in_class_J(self) -> bool:
        """Two increasing full branches, expanding right branch, away from 0."""
        return (self.orientation is Orientation.AWAY and self.branch_count == 2
                and self.lam is not None and all(b.increasing for b in self.branches))

    @property
    def neutral(self) -> Callable:
        return self.branches[0].func

    def __call__(self, x):
        return eval_map(self, x)


def _mp_critical(s: float) -> float:
    return solve_increasing_scalar(lambda c: c * (1.0 + c ** s) - 1.0, 0.0, 1.0,
                                   dF=lambda c: 1.0 + (1.0 + s) * c ** s)


def _mp_inverse_V(s: float) -> Callable:
    """V for the inverse branch, defined by V = x^s (1 - V)^(s + 1).

    Solving this identity directly avoids the cancellation in ``1 - y / x``.
    """

    def scalar(x):
        if x == 0.0:
            return 0.0
        xs = x ** s
        return solve_increasing_scalar(lambda v: v - xs * (1.0 - v) ** (s + 1.0), 0.0, 1.0,
                                       dF=lambda v: 1.0 + (s + 1.0) * xs * (1.0 - v) ** s,
                                       x0=min(xs, 0.5))

    def func(x):
        if np.ndim(x) == 0:
            return scalar(float(x))
        x = np.asarray(x, dtype=float)
        xs = x ** s
        out = solve_increasing(lambda v: v - xs * (1.0 - v) ** (s + 1.0),
                               np.zeros_like(x), np.ones_like(x),
                               dF=lambda v: 1.0 + (s + 1.0) * xs * (1.0 - v) ** s,
                               x0=np.minimum(xs, 0.5))
        return np.where(x == 0, 0.0, out)

    return func


def make_log_V(tau: float, theta: float) -> RegVaryingFn:
    """``V(x) = 2^tau / (log 2)^(theta+1) * x^tau |log x|^(theta+1)`` for tau in (0, 1], theta >= 0."""
    tau = check_real("tau", tau, lo=0, hi=1, lo_open=True)
    theta = check_real("theta", theta, lo=0)
    cst = 2.0 ** tau / math.log(2.0) ** (theta + 1.0)

    def func(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            x_arr = np.asarray(x, dtype=float)
            out = np.where(x_arr > 0, cst * x_arr ** tau * np.abs(np.log(np.where(x_arr > 0, x_arr, 1.0))) ** (theta + 1.0), 0.0)
        return float(out) if np.ndim(x) == 0 else out

    # V increases exactly where |log x| > (theta + 1) / tau.
    radius = min(0.5, math.exp(-(theta + 1.0) / tau))
    return RegVaryingFn(tau, func, radius, f"log(tau={tau}, theta={theta})")


def make_map(family: str, **params) -> IntervalMap:
    """Build an :class:`IntervalMap` from a family id and its parameters.

    Examples
    --------
    >>> T = make_map("mp", s=0.5)
    >>> round(float(T(0.25)), 12)
    0.375
    """
    if family not in FAMILIES:
        raise ParameterError(f"unknown family {family!r}; expected one of {FAMILIES}")
    builder = _BUILDERS[family]
    return builder(**params)


def _build_mp(s):
    s = check_real("s", s, lo=0, lo_open=True)
    c = _mp_critical(s)
    V = RegVaryingFn(s, lambda x: x ** s, c, f"x^{s}", inverse=lambda v: v ** (1.0 / s))
    d = lambda x: 1.0 + (1.0 + s) * x ** s
    left = Branch(0.0, c, lambda x: x * (1.0 + x ** s), d)
    right = Branch(c, 1.0, lambda x: x * (1.0 + x ** s) - 1.0, d)
    lam = 1.0 + (1.0 + s) * c ** s
    return IntervalMap("mp", {"s": s}, Orientation.AWAY, V, (left, right), c, lam)


def _build_mp_inverse(s):
    s = check_real("s", s, lo=0, lo_open=True)
    vf = _mp_inverse_V(s)
    V = RegVaryingFn(s, vf, 1.0, f"mp-inverse V (s={s})",
                     inverse=lambda v: (v / (1.0 - v) ** (s + 1.0)) ** (1.0 / s))

    def fwd(x):
        return x * (1.0 - vf(x))

    def deriv(x):
        # Differentiate the inverse relation y (1 + y^s) = x.
        y = fwd(x)
        return 1.0 / (1.0 + (1.0 + s) * y ** s)

    br = Branch(0.0, 1.0, fwd, deriv, inverse=lambda y: y * (1.0 + y ** s))
    return IntervalMap("mp-inverse", {"s": s}, Orientation.TOWARD, V, (br,))


def _farey_left(rho):
    return Branch(0.0, 2.0 ** (-1.0 / rho),
                  lambda x: x / (1.0 - x ** rho) ** (1.0 / rho),
                  lambda x: (1.0 - x ** rho) ** (-1.0 / rho - 1.0),
                  inverse=lambda y: y / (1.0 + y ** rho) ** (1.0 / rho))


def _farey_V(rho):
    def func(x):
        out = np.expm1(-np.log1p(-np.asarray(x, dtype=float) ** rho) / rho)
        return float(out) if np.ndim(x) == 0 else out

    return RegVaryingFn(rho, func, 2.0 ** (-1.0 / rho), f"farey V (rho={rho})",
                        inverse=lambda v: (1.0 - (1.0 + v) ** (-rho)) ** (1.0 / rho))


def _build_farey(rho):
    rho = check_real("rho", rho, lo=0, hi=1, lo_open=True)
    cut = 2.0 ** (-1.0 / rho)
    right = Branch(cut, 1.0, lambda x: (1.0 - x ** rho) ** (1.0 / rho) / x,
                   lambda x: -(1.0 - x ** rho) ** (1.0 / rho - 1.0) * x ** (rho - 2.0)
                   - (1.0 - x ** rho) ** (1.0 / rho) / x ** 2,
                   inverse=lambda y: (1.0 + y ** rho) ** (-1.0 / rho), increasing=False)
    return IntervalMap("farey", {"rho": rho}, Orientation.AWAY, _farey_V(rho),
                       (_farey_left(rho), right), cut, None,
                       ("right branch is decreasing",))


def _build_farey_g(rho):
    rho = check_real("rho", rho, lo=0, hi=1, lo_open=True)

    def W(x):
        out = -np.expm1(-np.log1p(np.asarray(x, dtype=float) ** rho) / rho)
        return float(out) if np.ndim(x) == 0 else out

    V = RegVaryingFn(rho, W, 1.0, f"farey-g V (rho={rho})",
                     inverse=lambda w: ((1.0 - w) ** (-rho) - 1.0) ** (1.0 / rho))
    br = Branch(0.0, 1.0, lambda x: x / (1.0 + x ** rho) ** (1.0 / rho),
                lambda x: (1.0 + x ** rho) ** (-1.0 / rho - 1.0),
                inverse=lambda y: y / (1.0 - y ** rho) ** (1.0 / rho))
    return IntervalMap("farey-g", {"rho": rho}, Orientation.TOWARD, V, (br,))


def _build_h(rho):
    rho = check_real("rho", rho, lo=0, hi=1, lo_open=True)
    k = 2.0 ** (1.0 / rho)
    cut = 1.0 / k
    right = Branch(cut, 1.0, lambda x: (k * x - 1.0) / (k - 1.0),
                   lambda x: k / (k - 1.0) + 0.0 * x,
                   inverse=lambda y: (y * (k - 1.0) + 1.0) / k)
    return IntervalMap("h", {"rho": rho}, Orientation.AWAY, _farey_V(rho),
                       (_farey_left(rho), right), cut, k / (k - 1.0))


def _build_log(tau, theta):
    tau = check_real("tau", tau, lo=0, hi=1, lo_open=True, hi_open=True)
    V = make_log_V(tau, theta)
    theta = float(theta)
    cst = 2.0 ** tau / math.log(2.0) ** (theta + 1.0)

    def deriv(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            L = -np.log(x)
            out = 1.0 + cst * x ** tau * L ** theta * ((1.0 + tau) * L - (theta + 1.0))
        return np.where(x > 0, out, 1.0)

    notes = []
    mono = min(0.5, math.exp(-(theta + 1.0) / (1.0 + tau)))
    xs = np.linspace(mono, 0.5, 2001)
    lhs = xs * (1.0 + V(xs))
    if np.any(np.diff(lhs) <= 0) or np.any(lhs > 1.0 + 1e-12):
        notes.append("left branch is not monotone on [0, 1/2]; inversion restricted to "
                     f"[0, {mono:.6g}]")
        log.warning("log map (tau=%s, theta=%s): %s", tau, theta, notes[-1])
        hi = mono
    else:
        hi = 0.5
    left = Branch(0.0, hi, lambda x: x * (1.0 + V(x)), deriv)
    right = Branch(0.5, 1.0, lambda x: 2.0 * x - 1.0, lambda x: 2.0 + 0.0 * x,
                   inverse=lambda y: 0.5 * (y + 1.0))
    return IntervalMap("log", {"tau": tau, "theta": theta}, Orientation.AWAY, V,
                       (left, right), 0.5, 2.0, tuple(notes))


def _build_custom(V, orientation="away", cut=None, right=None, right_inverse=None, lam=None):
    if not isinstance(V, RegVaryingFn):
        raise ParameterError("V must be a RegVaryingFn")
    orientation = Orientation(orientation) if not isinstance(orientation, Orientation) else orientation
    sign = 1.0 if orientation is Orientation.AWAY else -1.0
    hi = 1.0 if cut is None else check_real("cut", cut, lo=0, hi=1, lo_open=True, hi_open=True)
    branches = [Branch(0.0, hi, lambda x: x * (1.0 + sign * V(x)))]
    if right is not None:
        if cut is None:
            raise ParameterError("cut is required when a right branch is given")
        branches.append(Branch(hi, 1.0, right, inverse=right_inverse))
    return IntervalMap("custom", {"cut": cut, "lam": lam}, orientation, V,
                       tuple(branches), cut, lam)


_BUILDERS = {
    "mp": _build_mp,
    "mp-inverse": _build_mp_inverse,
    "farey": _build_farey,
    "farey-g": _build_farey_g,
    "h": _build_h,
    "log": _build_log,
    "custom": _build_custom,
}


def eval_map(T: IntervalMap, x):
    """Evaluate ``T`` at a float or array of points in ``[0, 1]``."""
    if np.ndim(x) == 0:
        x = float(x)
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"x must lie in [0, 1] (got {x})")
        if T.cut is None or x <= T.cut:
            return float(T.branches[0].func(x))
        return float(T.branches[1].func(x))
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise DomainError("x must lie in [0, 1]")
    if T.cut is None:
        return np.asarray(T.branches[0].func(x), dtype=float)
    left = x <= T.cut
    out = np.empty_like(x)
    with np.errstate(all="ignore"):
        out[left] = T.branches[0].func(x[left])
        out[~left] = T.branches[1].func(x[~left])
    return out


def inverse_branch(T: IntervalMap, branch: int, y):
    """Preimage of ``y`` under branch ``branch`` of ``T``.

    Closed forms are used where the family has one; otherwise a bracketed
    Newton/bisection solve to relative tolerance 1e-15.
    """
    branch = check_int("branch", branch, lo=0)
    if branch >= T.branch_count:
        raise ParameterError(f"branch must be < {T.branch_count} (got {branch})")
    br: Branch = T.branches[branch]
    lo_img, hi_img = br.image
    scalar = np.ndim(y) == 0
    yy = np.atleast_1d(np.asarray(y, dtype=float))
    tol = 1e-13
    if np.any((yy < lo_img - tol) | (yy > hi_img + tol)):
        raise DomainError(f"y outside the image [{lo_img}, {hi_img}] of branch {branch}")
    yy = np.clip(yy, lo_img, hi_img)
    if br.inverse is not None:
        with np.errstate(all="ignore"):
            out = np.asarray(br.inverse(yy), dtype=float)
        out = np.clip(out, br.lo, br.hi)
    else:
        s = 1.0 if br.increasing else -1.0
        F = lambda t: s * (br.func(t) - yy)
        dF = None if br.deriv is None else (lambda t: s * br.deriv(t))
        out = solve_increasing(F, np.full(yy.shape, br.lo), np.full(yy.shape, br.hi), dF=dF)
    return float(out[0]) if scalar else out


def inverse_neutral_scalar(T: IntervalMap) -> Callable[[float], float]:
    """Fast float-only inverse of the neutral branch, for long orbit loops."""
    br: Branch = T.branches[0]
    if br.inverse is not None:
        return br.inverse
    f, d, hi = br.func, br.deriv, br.hi

    def inv(y: float) -> float:
        return solve_increasing_scalar(lambda t: f(t) - y, 0.0, hi, dF=d,
                                       x0=y / (1.0 + float(T.V(y))) if y > 0 else None)

    return inv


@dataclass(frozen=True)
class RegularVariationReport:
    xs: np.ndarray
    t_set: tuple
    ratios: np.ndarray
    targets: np.ndarray
    deviation: np.ndarray
    depth_reached: int

    @property
    def max_deviation(self) -> float:
        """Largest |ratio - t^sigma| over ``t`` at the deepest level reached."""
        return float(np.nanmax(self.deviation[self.depth_reached - 1]))


def check_regular_variation(V: RegVaryingFn, t_set=(0.5, 2.0, 3.0), depth: int = 40):
    """Tabulate ``V(t x_j) / V(x_j)`` at ``x_j = r 2^-j`` against ``t^sigma``.

    The table stops early when values underflow.
    """
    depth = check_int("depth", depth, lo=1)
    t = np.asarray(t_set, dtype=float)
    r = V.valid_radius / max(1.0, float(t.max()))
    xs = r * 2.0 ** -np.arange(depth, dtype=float)
    targets = t ** V.sigma
    ratios = np.full((depth, t.size), np.nan)
    reached = depth
    with np.errstate(all="ignore"):
        for j, x in enumerate(xs):
            vx = float(V(x))
            num = np.array([float(V(ti * x)) for ti in t])
            if not (vx > 0 and np.isfinite(vx)) or np.any(~(num > 0)):
                reached = j
                break
            ratios[j] = num / vx
    if reached == 0:
        raise DomainError("V underflows at the first level")
    dev = np.abs(ratios - targets)
    return RegularVariationReport(xs[:reached], tuple(t_set), ratios[:reached], targets,
                                  dev[:reached], reached)
