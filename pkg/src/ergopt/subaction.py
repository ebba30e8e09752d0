"""Existence side: Assumption A, the modulus Omega and grid sub-actions.

For a two-branch map moving away from 0 and a modulus ``omega`` with
``omega / V`` growing at a positive polynomial rate, every ``omega``-continuous
potential has a sub-action with modulus ``Omega``.  ``Omega`` is the smallest
concave majorant of the running maximum of ``omega / V``.  The sub-action is
the supremum over backward paths of Birkhoff sums of ``f - m``, computed here
by value iteration on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import DomainError, ParameterError, check_int, check_real, check_sorted_grid
from .legendre import GridFunction, concave_conjugate, conjugate_kinks
from .maps import IntervalMap, RegVaryingFn, eval_map, inverse_branch
from .moduli import Modulus, modulus_norm

XI0_LATTICE = (2.0, 1.5, 1.1)
ETA0_LATTICE = tuple(2.0 ** -i for i in range(1, 11))


@dataclass(frozen=True)
class AssumptionA:
    holds: bool
    gamma: float
    xi0: float
    eta0: float
    gamma_min: float
    violation: dict | None = None


def growth_exponents(omega: Modulus, V: RegVaryingFn, h, xis) -> np.ndarray:
    """``log(theta0(xi h) / theta0(h)) / log(xi)`` with ``theta0 = omega / V``; shape (xi, h)."""
    h = np.asarray(h, dtype=float)
    xis = np.asarray(xis, dtype=float)
    with np.errstate(all="ignore"):
        base = omega(h) / V(h)
        xh = xis[:, None] * h[None, :]
        num = omega(xh) / V(xh)
        return np.log(num / base[None, :]) / np.log(xis)[:, None]


def check_assumption_A(omega: Modulus, V: RegVaryingFn, h_grid=None, xis=None,
                       resolution: float = 0.01, xi0_lattice=XI0_LATTICE,
                       eta0_lattice=ETA0_LATTICE) -> AssumptionA:
    """Largest certified exponent ``gamma`` over a lattice of ``(xi0, eta0)``.

    The certified value is the sampled minimum exponent rounded down to the
    resolution.  When no lattice point certifies ``gamma >= resolution`` the
    worst sampled pair ``(h, xi)`` is returned as the violation.
    """
    resolution = check_real("resolution", resolution, lo=0, lo_open=True)
    h = np.geomspace(1e-300, max(eta0_lattice), 3000) if h_grid is None else np.asarray(h_grid, float)
    xi = np.linspace(1.0, max(xi0_lattice), 41)[1:] if xis is None else np.asarray(xis, float)
    g = growth_exponents(omega, V, h, xi)
    g = np.where(np.isfinite(g), g, -np.inf)
    best = None
    for xi0 in sorted(xi0_lattice, reverse=True):
        for eta0 in sorted(eta0_lattice, reverse=True):
            sub = g[np.ix_(xi <= xi0 * (1 + 1e-12), h < eta0)]
            if sub.size == 0:
                continue
            gmin = float(sub.min())
            cert = math.floor(gmin / resolution + 1e-9) * resolution if np.isfinite(gmin) else -math.inf
            if best is None or cert > best[0] + 1e-12:
                best = (cert, xi0, eta0, gmin)
    if best is None:
        raise ParameterError("no sample falls inside the (xi0, eta0) lattice")
    cert, xi0, eta0, gmin = best
    if cert >= resolution:
        return AssumptionA(True, round(cert, 12), xi0, eta0, gmin)
    mask_x = xi <= xi0 * (1 + 1e-12)
    mask_h = h < eta0
    sub = g[np.ix_(mask_x, mask_h)]
    i, j = np.unravel_index(int(np.argmin(sub)), sub.shape)
    xv, hv = float(xi[mask_x][i]), float(h[mask_h][j])
    with np.errstate(all="ignore"):
        ratio = float(omega(xv * hv) / V(xv * hv) / (omega(hv) / V(hv)))
    viol = {"h": hv, "xi": xv, "ratio": ratio, "required": xv ** resolution}
    return AssumptionA(False, max(cert, 0.0), xi0, eta0, gmin, viol)


@dataclass(frozen=True)
class OmegaPipeline:
    xs: np.ndarray
    theta0: np.ndarray
    theta1: np.ndarray
    dual: np.ndarray
    theta1_star: np.ndarray
    theta2: np.ndarray
    theta2_star: np.ndarray
    cap: float
    Omega: GridFunction

    def __call__(self, h):
        return self.Omega(np.minimum(h, self.xs[-1]))


def omega_pipeline(xs, theta0, slope_cap="hull", n_dual: int = 4000) -> OmegaPipeline:
    """Running max, conjugate, truncation and biconjugate of sampled ``theta0``.

    ``xs`` must start at 0 and contain 1.  ``slope_cap="hull"`` truncates the
    conjugate at the steepest chord of the running max from the origin, which
    makes the biconjugate the upper concave hull.  A number uses that cap
    instead (``1.0`` keeps slopes in ``[0, 1]``).
    """
    xs = check_sorted_grid("xs", xs)
    th0 = np.asarray(theta0, dtype=float)
    if xs[0] != 0.0 or not np.any(xs == 1.0):
        raise ParameterError("xs must start at 0 and contain 1")
    inside = xs <= 1.0
    th1 = np.maximum.accumulate(np.where(inside, th0, -np.inf))
    th1 = np.where(inside, th1, th1[inside][-1])
    if slope_cap == "hull":
        cap = float(np.max(th1[1:] / xs[1:]))
    else:
        cap = check_real("slope_cap", slope_cap, lo=0, lo_open=True)
    g1 = GridFunction(xs, th1)
    kinks = conjugate_kinks(g1)
    dual = np.unique(np.concatenate([
        [0.0, cap], np.geomspace(cap * 1e-14, cap, n_dual), kinks[(kinks > 0) & (kinks < cap)]]))
    th1s = concave_conjugate(g1, dual).ys
    top = th1s[-1]
    th2 = np.minimum(th1s, top)
    th2s = concave_conjugate(GridFunction(dual, th2), xs).ys
    Om = th2s + top
    return OmegaPipeline(xs, th0, th1, dual, th1s, th2, th2s, cap, GridFunction(xs, Om))


def primal_grid(grid_size: int = 4000, h_min: float = 1e-12, x_max: float = 4.0) -> np.ndarray:
    return np.unique(np.concatenate([[0.0], np.geomspace(h_min, 1.0, grid_size),
                                     np.linspace(1.0, x_max, 61)]))


def build_Omega(omega: Modulus, V: RegVaryingFn, grid_size: int = 4000, slope_cap="hull",
                h_min: float = 1e-12, x_max: float = 4.0) -> OmegaPipeline:
    """``Omega`` for ``omega`` and ``V`` on a log-refined grid over ``[0, x_max]``."""
    grid_size = check_int("grid_size", grid_size, lo=8)
    xs = primal_grid(grid_size, h_min, x_max)
    with np.errstate(all="ignore"):
        th0 = np.where(xs > 0, omega(xs) / V(np.where(xs > 0, xs, 1.0)), 0.0)
    th0 = np.where(np.isfinite(th0), th0, 0.0)
    return omega_pipeline(xs, th0, slope_cap)


@dataclass(frozen=True)
class ExpansionData:
    rho_T: float
    C7: float
    C8: float
    lam: float
    gamma: float
    xi0: float
    eta0: float
    rho_T_omega: float
    cover: int


def _straddle_ok(T: IntervalMap, rho: float) -> bool:
    c = T.cut
    x = np.linspace(max(c - rho / 2, 0.0), c, 257)[:-1]
    y = np.linspace(c, min(c + rho / 2, 1.0), 257)[1:]
    return float(eval_map(T, x).min() - eval_map(T, y).max()) >= 0.5


def _halving_ok(V: RegVaryingFn, rho: float) -> bool:
    h = np.geomspace(1e-12, rho, 400)
    return bool(np.all(V(h / 2) >= V(h) / 2.0 ** (V.sigma + 1) * (1 - 1e-12)))


def expansion_data(T: IntervalMap, A: AssumptionA) -> ExpansionData:
    """Local expansion constants for a two-branch map and a certified Assumption A."""
    if not T.in_class_J:
        raise ParameterError(f"map family {T.family!r} is not a two-branch expanding map")
    if not A.holds:
        raise ParameterError("Assumption A does not hold")
    xs = np.linspace(T.cut, 1.0, 10_001)[1:]
    q = np.diff(eval_map(T, xs)) / np.diff(xs)
    lam = float(q.min()) - 1e-6
    rho_T = None
    for i in range(40):
        rho = 0.5 * 2.0 ** -i
        if _straddle_ok(T, rho) and _halving_ok(T.V, rho):
            rho_T = rho
            break
    if rho_T is None:
        raise DomainError("no admissible expansion radius found")
    s = T.sigma
    C7 = min(2.0 ** (-s - 2), (lam - 1) * 2.0 ** (-s - 2), A.xi0 - 1, 1.0 / A.eta0 - 1)
    C8 = (1 + C7) ** A.gamma - 1
    r = min(rho_T, A.eta0)
    return ExpansionData(rho_T, C7, C8, lam, A.gamma, A.xi0, A.eta0, r, math.ceil(2 / r) + 1)


@dataclass(frozen=True)
class SubactionResult:
    U: GridFunction
    k_used: int
    converged: bool
    last_increment: float
    bound: float | None = None
    bound_ok: bool | None = None
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class _Backward:
    """Preimage data of every grid node under every branch, as interpolation stencils."""

    valid: list
    idx: list
    wt: list
    fy: list


def _backward(T: IntervalMap, f, grid: np.ndarray, m: float) -> _Backward:
    valid, idx, wt, fy = [], [], [], []
    for b in range(T.branch_count):
        lo, hi = T.branches[b].image
        ok = (grid >= lo - 1e-15) & (grid <= hi + 1e-15)
        y = np.zeros(grid.size)
        y[ok] = inverse_branch(T, b, np.clip(grid[ok], lo, hi))
        i = np.clip(np.searchsorted(grid, y, side="right") - 1, 0, grid.size - 2)
        w = (y - grid[i]) / (grid[i + 1] - grid[i])
        valid.append(ok)
        idx.append(i)
        wt.append(np.clip(w, 0.0, 1.0))
        fy.append(np.where(ok, np.asarray(f(y), dtype=float) - m, -np.inf))
    return _Backward(valid, idx, wt, fy)


def bellman(bw: _Backward, U: np.ndarray) -> np.ndarray:
    """``max over branches of f(y) - m + U(y)`` at every node, ``-inf`` without preimage."""
    out = np.full(U.size, -np.inf)
    for ok, i, w, fy in zip(bw.valid, bw.idx, bw.wt, bw.fy):
        val = fy + (1 - w) * U[i] + w * U[i + 1]
        out = np.maximum(out, np.where(ok, val, -np.inf))
    return out


def compute_subaction(T: IntervalMap, f, m: float, grid, eps: float = 1e-9, k_cap: int = 10_000,
                      stall: int = 10, f_norm: float | None = None,
                      expansion: ExpansionData | None = None,
                      pipeline: OmegaPipeline | None = None,
                      early_stop: bool = True) -> SubactionResult:
    """Sup over backward paths of ``S_k (f - m)``, by value iteration on ``grid``.

    Iterates ``U <- max(0, B U)`` where ``B`` takes the best preimage step.
    Stops once the largest increment stays below ``eps`` for ``stall``
    consecutive steps, or at ``k_cap``.  When ``f_norm``, ``expansion`` and
    ``pipeline`` are given the result is compared with the a priori bound
    ``2 L |f|_omega Omega(1) / C8``.
    """
    grid = check_sorted_grid("grid", grid)
    if grid[0] != 0.0 or grid[-1] != 1.0:
        raise ParameterError("grid must span [0, 1]")
    k_cap = check_int("k_cap", k_cap, lo=1)
    bw = _backward(T, f, grid, float(m))
    U = np.zeros(grid.size)
    quiet = 0
    inc = math.inf
    history = []
    k = 0
    while k < k_cap:
        k += 1
        new = np.maximum(0.0, bellman(bw, U))
        inc = float(np.max(new - U))
        U = new
        if k <= 50 or k % 100 == 0:
            history.append((k, inc))
        quiet = quiet + 1 if inc < eps else 0
        if early_stop and quiet >= stall:
            break
    converged = quiet >= stall
    bound = bound_ok = None
    if f_norm is not None and expansion is not None and pipeline is not None:
        bound = 2 * expansion.cover * f_norm * float(pipeline(1.0)) / expansion.C8
        bound_ok = bool(U.max() <= bound)
    return SubactionResult(GridFunction(grid, U), k, converged, inc, bound, bound_ok, history)


@dataclass(frozen=True)
class SubactionCheck:
    max_residual: float
    tol: float
    passed: bool
    worst_x: float
    U_seminorm: float
    seminorm_bound: float | None


def grid_eps(f_norm: float, omega: Modulus, grid) -> float:
    """Stall threshold matched to how finely ``grid`` resolves an ``omega``-continuous ``f``.

    The interpolated recursion has its own growth rate, slightly above ``m``.
    The excess shrinks with the grid step; on MP(0.5) with random kernel
    potentials it stays below 4% of ``|f|_omega * omega(step)``, so the
    threshold is set at 10% of that quantity.
    """
    step = float(np.max(np.diff(np.asarray(grid, dtype=float))))
    return 0.1 * f_norm * float(omega(step))


def verify_subaction(T: IntervalMap, f, U: GridFunction, m: float, pipeline: OmegaPipeline,
                     f_norm: float, expansion: ExpansionData | None = None, refine: int = 4,
                     eps: float = 1e-9) -> SubactionCheck:
    """Residual ``f + U - U o T - m`` on a grid ``refine`` times finer than ``U``'s.

    Passes when the residual is at most ``2 |f|_omega Omega(step) + eps`` where
    ``step`` is the largest node spacing of ``U``.  Also reports a sampled
    ``Omega``-seminorm of ``U`` and, given ``expansion``, the a priori bound
    ``L |f|_omega / C8`` it should respect.
    """
    refine = check_int("refine", refine, lo=1)
    xs = U.xs
    fine = np.concatenate([np.linspace(a, b, refine + 1)[:-1] for a, b in zip(xs[:-1], xs[1:])]
                          + [xs[-1:]])
    r = np.asarray(f(fine), dtype=float) + U(fine) - U(eval_map(T, fine)) - m
    step = float(np.max(np.diff(xs)))
    tol = 2.0 * f_norm * float(pipeline(step)) + eps
    i = int(np.argmax(r))
    big_omega = Modulus(lambda h: pipeline(h), "Omega")
    semi = modulus_norm(xs, U.ys, big_omega).value
    bound = None if expansion is None else expansion.cover * f_norm / expansion.C8
    return SubactionCheck(float(r[i]), tol, bool(r[i] <= tol), float(fine[i]), semi, bound)


@dataclass(frozen=True)
class PairingCheck:
    n_pairs: int
    worst_slack: float
    passed: bool


def backward_pairing_check(T: IntervalMap, pipeline: OmegaPipeline, omega: Modulus,
                           exp: ExpansionData, n_pairs: int = 10_000, seed: int = 0,
                           d_min: float = 1e-6, tol: float = 1e-9) -> PairingCheck:
    """Sample one backward step of close pairs and test the Omega contraction.

    For ``d0 = d(x0, y0) < rho`` and a preimage ``x1`` of ``x0``, the preimage
    ``y1`` of ``y0`` closest to ``x1`` must satisfy
    ``Omega(d1) + C8 omega(d1) <= Omega(d0)``.
    """
    rng = np.random.default_rng(seed)
    r = exp.rho_T_omega
    x0 = rng.uniform(0.0, 1.0, n_pairs)
    d0 = np.exp(rng.uniform(math.log(d_min), math.log(r), n_pairs)) * (1 - 1e-12)
    sign = np.where(rng.uniform(size=n_pairs) < 0.5, -1.0, 1.0)
    y0 = x0 + sign * d0
    y0 = np.where((y0 < 0) | (y0 > 1), x0 - sign * d0, y0)
    d0 = np.abs(y0 - x0)
    bx = rng.integers(0, T.branch_count, n_pairs)
    x1 = np.empty(n_pairs)
    for b in range(T.branch_count):
        sel = bx == b
        lo, hi = T.branches[b].image
        x1[sel] = inverse_branch(T, b, np.clip(x0[sel], lo, hi))
    best = np.full(n_pairs, np.inf)
    for b in range(T.branch_count):
        lo, hi = T.branches[b].image
        y1 = inverse_branch(T, b, np.clip(y0, lo, hi))
        best = np.minimum(best, np.where((y0 >= lo) & (y0 <= hi), np.abs(y1 - x1), np.inf))
    d1 = best
    slack = pipeline(d0) - pipeline(d1) - exp.C8 * omega(d1)
    worst = float(slack.min())
    return PairingCheck(n_pairs, worst, worst >= -tol)


def potential_norm(f, omega: Modulus, n: int = 10_000, seed: int = 0) -> float:
    """Sampled ``omega``-Holder seminorm of ``f`` on a uniform grid of ``[0, 1]``."""
    xs = np.linspace(0.0, 1.0, n)
    return modulus_norm(xs, f(xs), omega, seed=seed).value
