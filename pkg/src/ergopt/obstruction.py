"""Counterexample potential with no continuous sub-action, and its certificates.

The potential is ``f = Phi * omega(d(x, S))`` where ``S`` holds 0 and the
anchors ``w_{n_k}``.  ``Phi`` is a sum of hat functions on intervals ``I_k``
around the anchors with amplitude ``+1``, ``-xi`` or ``0`` according to
``k mod 3``.  Segments of the anchor orbit then collect a positive Birkhoff
sum bounded away from 0, while every point that starts on a positive hat
reaches a nonpositive sum once it has crossed the next negative hat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import ParameterError, check_int, check_real
from .ergodic import CompensatedSum, birkhoff_sum, estimate_max_average  # noqa: F401
from .maps import Orientation, eval_map
from .moduli import Modulus, liminf_ratio
from .orbits import WSchedule

POSITIVE, NEGATIVE, ZERO = 1, -1, 0


def bump_class(k: int, orientation: Orientation) -> int:
    """Sign class of the hat on ``I_k`` before partner checks."""
    r = k % 3
    if orientation is Orientation.TOWARD:
        return {1: POSITIVE, 2: NEGATIVE, 0: ZERO}[r]
    return {2: POSITIVE, 1: NEGATIVE, 0: ZERO}[r]


@dataclass
class CounterexamplePotential:
    """Piecewise data of the potential, arrays sorted by increasing position."""

    sched: WSchedule
    omega: Modulus
    xi: float
    ks: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    core_lo: np.ndarray
    core_hi: np.ndarray
    cls: np.ndarray
    S: np.ndarray
    regime: str
    notes: list = field(default_factory=list)

    @property
    def orientation(self) -> Orientation:
        return self.sched.orientation

    def slot(self, k: int) -> int:
        i = int(np.searchsorted(-self.ks, -k))
        if i >= self.ks.size or self.ks[i] != k:
            raise ParameterError(f"no interval I_k for k = {k}")
        return i

    def interval(self, k: int) -> tuple[float, float]:
        i = self.slot(k)
        return float(self.lo[i]), float(self.hi[i])

    def transition_width(self, k: int) -> float:
        """Width of the thinner linear ramp of the hat on ``I_k``."""
        i = self.slot(k)
        return float(min(self.core_lo[i] - self.lo[i], self.hi[i] - self.core_hi[i]))

    def positive_ks(self) -> list[int]:
        return sorted(int(k) for k, c in zip(self.ks, self.cls) if c == POSITIVE)

    def negative_ks(self) -> list[int]:
        return sorted(int(k) for k, c in zip(self.ks, self.cls) if c == NEGATIVE)

    def with_xi(self, xi: float) -> "CounterexamplePotential":
        return replace(self, xi=check_real("xi", xi, lo=0, lo_open=True))

    def __call__(self, x):
        return eval_potential(self, x)


def build_potential(sched: WSchedule, omega: Modulus, xi: float = 1.0,
                    check_regime: bool = True) -> CounterexamplePotential:
    """Assemble the counterexample potential on a gated schedule.

    Hats exist for ``2 <= k <= K-1``.  A positive hat is kept only when its
    compensating negative neighbour exists (``k+1`` toward 0, ``k-1`` away
    from 0); otherwise its class is set to zero.
    """
    xi = check_real("xi", xi, lo=0, lo_open=True)
    K = sched.K
    if K < 5:
        raise ParameterError("schedule needs at least 5 times")
    notes = []
    regime = "unchecked"
    if check_regime:
        regime = liminf_ratio(omega, sched.map.V).tag
        if regime != "ObstructionRegime":
            notes.append(f"liminf classification is {regime}; construction proceeds anyway")
    w = sched.anchors()
    ks = np.arange(K - 1, 1, -1)
    wk = w[ks - 1]
    wn = w[ks]          # anchor k+1, closer to 0
    wp = w[ks - 2]      # anchor k-1, farther from 0
    lo = (3 * wk + 2 * wn) / 5
    hi = (3 * wk + 2 * wp) / 5
    core_lo = (2 * wk + wn) / 3
    core_hi = (2 * wk + wp) / 3
    cls = np.array([bump_class(int(k), sched.orientation) for k in ks])
    for i, k in enumerate(ks):
        if cls[i] != POSITIVE:
            continue
        partner = k + 1 if sched.orientation is Orientation.TOWARD else k - 1
        if not 2 <= partner <= K - 1:
            cls[i] = ZERO
    S = np.concatenate([[0.0], np.sort(w)])
    return CounterexamplePotential(sched, omega, xi, ks, lo, hi, core_lo, core_hi, cls, S,
                                   regime, notes)


def _locate(P: CounterexamplePotential, x: np.ndarray):
    idx = np.searchsorted(P.lo, x, side="left") - 1
    ok = idx >= 0
    idx_c = np.clip(idx, 0, P.lo.size - 1)
    inside = ok & (x > P.lo[idx_c]) & (x < P.hi[idx_c])
    return idx_c, inside


def hat_values(P: CounterexamplePotential, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(slot, inside, phi)`` for each point: the interval slot and hat value."""
    x = np.asarray(x, dtype=float)
    i, inside = _locate(P, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        up = (x - P.lo[i]) / (P.core_lo[i] - P.lo[i])
        down = (P.hi[i] - x) / (P.hi[i] - P.core_hi[i])
    phi = np.clip(np.minimum(np.minimum(up, down), 1.0), 0.0, 1.0)
    phi = np.where(inside, phi, 0.0)
    return i, inside, phi


def dist_to_anchors(P: CounterexamplePotential, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    j = np.searchsorted(P.S, x)
    left = P.S[np.clip(j - 1, 0, P.S.size - 1)]
    right = P.S[np.clip(j, 0, P.S.size - 1)]
    return np.minimum(np.abs(x - left), np.abs(right - x))


def potential_parts(P: CounterexamplePotential, x):
    """Split ``f = pos - xi * neg`` into its two nonnegative parts."""
    i, inside, phi = hat_values(P, x)
    base = phi * P.omega(dist_to_anchors(P, x))
    c = P.cls[i]
    pos = np.where(inside & (c == POSITIVE), base, 0.0)
    neg = np.where(inside & (c == NEGATIVE), base, 0.0)
    return pos, neg


def eval_potential(P: CounterexamplePotential, x):
    """Value of the potential at a float or array of points."""
    pos, neg = potential_parts(P, np.atleast_1d(np.asarray(x, dtype=float)))
    out = pos - P.xi * neg
    return float(out[0]) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class PositiveSumRow:
    k: int
    qualifying: bool
    segment_sum: float
    window_sum: float
    bound: float
    running_min: float


@dataclass(frozen=True)
class PositiveSums:
    rows: list
    stable: bool
    spread: float
    bounds_ok: bool

    def qualifying(self) -> list:
        return [r for r in self.rows if r.qualifying]


def _segment(P: CounterexamplePotential, k: int):
    """Orbit points of the segment ending at ``w_{n_k}`` and its window data.

    Toward 0 the segment is ``w_{n_{k-1}}, ..., w_{n_k - 1}`` and the window
    belongs to index ``k``.  Away from 0 it is ``T^j(w_{n_{k+1}})`` for
    ``j < n_{k+1} - n_k`` and the window belongs to index ``k+1``.
    """
    s = P.sched
    if P.orientation is Orientation.TOWARD:
        pts = s.w[s.n(k - 1):s.n(k)]
        kw = k
    else:
        pts = s.w[s.n(k + 1):s.n(k):-1]
        kw = k + 1
    return pts, kw


def verify_positive_sums(P: CounterexamplePotential, ks=None, last: int = 10,
                         tolerance: float = 0.2) -> PositiveSums:
    """Segment Birkhoff sums along the anchor orbit, read from the orbit table.

    For each ``k`` the row holds the full segment sum, the sum restricted to the
    counting window near the anchor, and the lower bound
    ``C2 / V(w) * omega(R)`` for that window.  ``stable`` asks that the running
    minimum over the last ``last`` qualifying rows varies by less than
    ``tolerance`` and stays positive.
    """
    s = P.sched
    toward = P.orientation is Orientation.TOWARD
    if ks is None:
        ks = range(2, s.K) if toward else range(2, s.K)
    C2 = s.constants()["C2"]
    rows = []
    run = math.inf
    positive = set(P.positive_ks())
    bounds_ok = True
    for k in ks:
        k = int(k)
        pts, kw = _segment(P, k)
        vals = eval_potential(P, pts)
        seg = math.fsum(vals)
        anchor = s.wk(kw) if toward else s.wk(kw - 1)
        R = s.radius(kw)
        dist = np.abs(pts - anchor)
        win = (dist >= R) & (dist <= s.gap(kw) / 3.0)
        wsum = math.fsum(vals[win])
        bound = C2 / float(s.map.V(s.wk(kw))) * float(P.omega(R))
        q = k in positive
        if q:
            run = min(run, seg)
            bounds_ok &= wsum >= bound
        rows.append(PositiveSumRow(k, q, seg, wsum, bound, run if q else math.nan))
    mins = np.array([r.running_min for r in rows if r.qualifying])
    if mins.size:
        tail = mins[-last:]
        spread = float((tail.max() - tail.min()) / tail.max()) if tail.max() > 0 else math.inf
        stable = bool(tail.min() > 0 and spread < tolerance and mins.size >= last)
    else:
        spread, stable = math.inf, False
    return PositiveSums(rows, stable, spread, bool(bounds_ok))


def cap_L(P: CounterexamplePotential, k: int) -> int:
    """Upper cap ``L_k`` on the time needed to cross half of ``I_k``."""
    s = P.sched
    s1 = s.sigma ** (1.0 + 1.0 / s.sigma)
    return int(math.ceil(3.0 / 7.0 * s.C0 * s1 * s.n(k) * s.bk(k) * s.gap(k)))


@dataclass(frozen=True)
class XiCalibration:
    xi_star: float
    ks: np.ndarray
    ratios: np.ndarray
    sup_ratio: float
    drift: float
    flagged: bool
    prefactor: float


def calibrate_xi(P: CounterexamplePotential, safety: float = 1.1) -> XiCalibration:
    """Amplitude of the negative hats that makes every stopped sum nonpositive.

    The ratio for a positive hat ``k`` compares the upper bound on what is
    collected inside ``I_k`` with the lower bound on what the next negative hat
    removes.  ``xi_star`` is ``safety`` times the prefactor times the sup.
    ``flagged`` marks a drift above 20% between the last quartile and the rest.
    """
    s = P.sched
    s1 = s.sigma ** (1.0 + 1.0 / s.sigma)
    C1 = s.constants()["C1"]
    pref = 3.0 / 7.0 * s.C0 * s1 / C1
    ks, ratios = [], []
    toward = P.orientation is Orientation.TOWARD
    for k in P.positive_ks():
        far = abs(s.wk(k + 1) - s.wk(k - 1))
        num = s.n(k + 1) * s.bk(k + 1) * far * float(P.omega(far))
        if toward:
            den = s.n(k) * s.bk(k) * s.gap(k + 1) * float(P.omega(s.radius(k + 1)))
        else:
            den = s.n(k - 1) * s.bk(k - 1) * s.gap(k) * float(P.omega(s.radius(k)))
        ks.append(k)
        ratios.append(num / den)
    ratios = np.asarray(ratios)
    if ratios.size == 0:
        raise ParameterError("no positive hats to calibrate")
    sup = float(ratios.max())
    q = max(1, ratios.size // 4)
    head = ratios[:-q] if ratios.size > q else ratios
    drift = float(ratios[-q:].max() / head.max() - 1.0)
    return XiCalibration(safety * pref * sup, np.asarray(ks), ratios, sup, drift,
                         abs(drift) > 0.2, pref)


@dataclass(frozen=True)
class StoppingTable:
    x: np.ndarray
    k: np.ndarray
    p: np.ndarray
    q: np.ndarray
    n: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    escaped: np.ndarray
    xi: float

    @property
    def sums(self) -> np.ndarray:
        return self.pos - self.xi * self.neg

    def critical_xi(self) -> float:
        """Smallest amplitude for which every sum in the table is nonpositive."""
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(self.pos > 0, self.pos / self.neg, 0.0)
        return float(np.max(r)) if r.size else 0.0


def stopping_table(P: CounterexamplePotential, xs) -> StoppingTable:
    """Stopped Birkhoff sums ``S_{n(x)} f(x)`` for a batch of starting points.

    Off the positive hats ``n(x) = 1``.  On a positive hat ``I_k`` the orbit is
    followed until it leaves ``I_k`` (time ``p``) and then until it first comes
    within ``R`` of the next anchor in its direction of travel (``q >= 1`` more
    steps).  Sums are kept in two parts so that ``xi`` can be varied afterwards.
    """
    s = P.sched
    T = s.map
    toward = P.orientation is Orientation.TOWARD
    x0 = np.asarray(xs, dtype=float)
    N = x0.size
    slot, inside, _ = hat_values(P, x0)
    on_pos = inside & (P.cls[slot] == POSITIVE)
    kk = np.where(on_pos, P.ks[slot], 0)
    p = np.ones(N, dtype=np.int64)
    q = np.zeros(N, dtype=np.int64)
    n = np.ones(N, dtype=np.int64)
    escaped = np.zeros(N, dtype=bool)
    pos_acc = CompensatedSum(N)
    neg_acc = CompensatedSum(N)
    a, b = potential_parts(P, x0)
    pos_acc.add(a)
    neg_acc.add(b)
    idx = np.nonzero(on_pos)[0]
    if idx.size:
        k_act = kk[idx]
        lo = P.lo[slot[idx]]
        hi = P.hi[slot[idx]]
        if toward:
            target = np.array([s.wk(int(k) + 1) for k in k_act])
            R = np.array([s.radius(int(k) + 1) for k in k_act])
        else:
            target = np.array([s.wk(int(k) - 1) for k in k_act])
            R = np.array([s.radius(int(k)) for k in k_act])
        limit = np.array([4 * (s.n(int(k) + 1) - s.n(int(k) - 1)) + 16 for k in k_act])
        cur = x0[idx].copy()
        phase = np.zeros(idx.size, dtype=np.int8)
        steps = np.zeros(idx.size, dtype=np.int64)
        pp = np.zeros(idx.size, dtype=np.int64)
        active = np.ones(idx.size, dtype=bool)
        pos_loc = CompensatedSum(idx.size)
        neg_loc = CompensatedSum(idx.size)
        esc = np.zeros(idx.size, dtype=bool)
        while active.any():
            a_i = np.nonzero(active)[0]
            cur[a_i] = eval_map(T, cur[a_i])
            steps[a_i] += 1
            c = cur[a_i]
            # Phase 1 stops at the first return within R of the target.
            in_ball = (phase[a_i] == 1) & (np.abs(c - target[a_i]) < R[a_i])
            stop = a_i[in_ball]
            active[stop] = False
            past = (c < target[a_i] - R[a_i]) if toward else (c > target[a_i] + R[a_i])
            bad = a_i[(phase[a_i] == 1) & ~in_ball & (past | (steps[a_i] > limit[a_i]))]
            esc[bad] = True
            active[bad] = False
            left = (phase[a_i] == 0) & ((c <= lo[a_i]) | (c >= hi[a_i]))
            enter = a_i[left]
            phase[enter] = 1
            pp[enter] = steps[enter]
            go = np.nonzero(active)[0]
            if go.size:
                pa, na = potential_parts(P, cur[go])
                full_a = np.zeros(idx.size)
                full_n = np.zeros(idx.size)
                full_a[go] = pa
                full_n[go] = na
                pos_loc.add(full_a)
                neg_loc.add(full_n)
        p[idx] = pp
        q[idx] = steps - pp
        n[idx] = steps
        escaped[idx] = esc
        pa_all = np.zeros(N)
        na_all = np.zeros(N)
        pa_all[idx] = pos_loc.value
        na_all[idx] = neg_loc.value
        pos_acc.add(pa_all)
        neg_acc.add(na_all)
    return StoppingTable(x0, kk, p, q, n, pos_acc.value, neg_acc.value, escaped, P.xi)


@dataclass(frozen=True)
class StoppingResult:
    k: int
    p: int
    q: int
    n: int
    value: float
    crossing_cap: int | None
    escaped: bool


def verify_stopping(P: CounterexamplePotential, x: float) -> StoppingResult:
    """Stopping data for one point; ``crossing_cap`` is ``L_k + L_{k+1} - 2`` on a positive hat."""
    t = stopping_table(P, np.array([float(x)]))
    k = int(t.k[0])
    cap = cap_L(P, k) + cap_L(P, k + 1) - 2 if k else None
    return StoppingResult(k, int(t.p[0]), int(t.q[0]), int(t.n[0]), float(t.sums[0]), cap,
                          bool(t.escaped[0]))


def sample_points(P: CounterexamplePotential, n: int, seed: int = 0) -> np.ndarray:
    """Seeded test points: 60% on positive hats, 20% on negative hats, 20% uniform."""
    n = check_int("n", n, lo=1)
    rng = np.random.default_rng(seed)
    n_pos = int(0.6 * n)
    n_neg = int(0.2 * n)
    n_uni = n - n_pos - n_neg
    out = []
    for cls, m in ((POSITIVE, n_pos), (NEGATIVE, n_neg)):
        slots = np.nonzero(P.cls == cls)[0]
        if slots.size == 0 or m == 0:
            n_uni += m
            continue
        pick = rng.choice(slots, m)
        u = rng.uniform(0.0, 1.0, m)
        out.append(P.lo[pick] + u * (P.hi[pick] - P.lo[pick]))
    out.append(rng.uniform(0.0, 1.0, n_uni))
    return np.concatenate(out)


def support_samples(P: CounterexamplePotential, per_interval: int) -> np.ndarray:
    """Uniform points in every ``I_k`` together with the anchors and 0."""
    grids = [np.linspace(a, b, per_interval + 2)[1:-1] for a, b in zip(P.lo, P.hi)]
    return np.unique(np.concatenate(grids + [P.S]))


@dataclass(frozen=True)
class ViolationCertificate:
    rows: list
    C5: float
    certified: bool
    reasons: list


def subaction_violation_certificate(P: CounterexamplePotential, sums: PositiveSums,
                                    m_estimate: float, K: int | None = None,
                                    m_tol: float = 1e-10) -> ViolationCertificate:
    """Per-k lower bounds on the increment any continuous sub-action would need.

    A sub-action ``u`` would satisfy ``u(w_{n_k}) - u(start) >= segment sum`` on
    each qualifying segment.  Toward 0 the increments stack up as ``k`` grows;
    away from 0 they stack up in the opposite direction.  Either way a
    uniformly positive increment contradicts continuity of ``u`` at 0.  The
    certificate is issued when the maximum average is 0 to within ``m_tol``
    and the running minimum is stable and positive.
    """
    rows = []
    for r in sums.qualifying():
        if K is not None and r.k > K:
            continue
        rows.append({
            "k": r.k,
            "w_n_k": P.sched.wk(r.k),
            "increment_lower_bound": r.segment_sum,
            "direction": "toward_zero" if P.orientation is Orientation.TOWARD else "away_from_zero",
        })
    reasons = []
    if abs(m_estimate) > m_tol:
        reasons.append(f"maximum average estimate {m_estimate:.3g} is not 0")
    if not sums.stable:
        reasons.append(f"running minimum not stable (spread {sums.spread:.3g})")
    C5 = min((r["increment_lower_bound"] for r in rows), default=math.nan)
    return ViolationCertificate(rows, C5, not reasons and C5 > 0, reasons)
