"""Orbits of the neutral fixed point and the geometric time schedule.

``w_n`` is the forward orbit ``T^n(w_0)`` for maps moving toward 0 and the
backward orbit along the neutral branch for maps moving away from 0.  Times
``n_k`` grow geometrically with ratio ``1/gamma`` and define the anchor points
``w_{n_k}`` used by the counterexample potential.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import DomainError, ParameterError, check_int, check_real
from .maps import IntervalMap, Orientation, RegVaryingFn, eval_map, inverse_neutral_scalar

C0_EXCESS_INFLATION = 1.05


def scale_b(V: RegVaryingFn, n):
    """``b(n)`` with ``1 / V(1 / b(n)) = n``, i.e. ``b(n) = 1 / V^-1(1/n)``.

    Examples
    --------
    >>> from ergopt.maps import make_map
    >>> round(float(scale_b(make_map("mp", s=0.5).V, 100)), 6)
    10000.0
    """
    n_arr = np.asarray(n, dtype=float)
    n_min = 1.0 / float(V(V.valid_radius))
    if np.any(n_arr < n_min * (1 - 1e-12)):
        raise DomainError(f"b(n) needs n >= 1/V(valid_radius) = {n_min:.6g}")
    out = 1.0 / V.invert(1.0 / n_arr)
    return float(out) if np.ndim(n) == 0 else out


def neutral_orbit(T: IntervalMap, w0: float, length: int) -> np.ndarray:
    """``w_0, ..., w_length`` along the neutral branch."""
    w0 = check_real("w0", w0, lo=0, hi=T.V.valid_radius, lo_open=True)
    length = check_int("length", length, lo=0)
    step = T.branches[0].func if T.orientation is Orientation.TOWARD else inverse_neutral_scalar(T)
    out = np.empty(length + 1)
    x = w0
    out[0] = x
    for i in range(1, length + 1):
        x = step(x)
        out[i] = x
    return out


def counting_constants(C0: float, sigma: float, gamma: float) -> dict:
    """Window-count constants ``C1, C1', C1'', C2`` for the given ``C0``."""
    s1 = sigma ** (1.0 + 1.0 / sigma)
    g = gamma ** (1.0 + 1.0 / sigma)
    C1 = 0.25 * (1.0 / C0 - 1.0 / C0 ** 2) * s1
    C1p = 0.5 * C1 / (C0 ** (sigma + 1.0) * sigma ** ((sigma + 1.0) ** 2 / sigma)) \
        * (1.0 - gamma) ** (sigma + 1.0) * g
    C1pp = (2.0 * (1.0 - gamma) * C0 / (sigma * g)) ** (-sigma)
    return {"C1": C1, "C1p": C1p, "C1pp": C1pp, "C2": C1p * C1pp}


@dataclass
class WSchedule:
    """Orbit table plus the geometric schedule ``n_1 < n_2 < ... < n_K``.

    Index ``k`` is 1-based in every public accessor.
    """

    map: IntervalMap
    w: np.ndarray
    times: np.ndarray
    gamma: float
    C0: float
    C0_raw: float
    b_times: np.ndarray
    trimmed: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return int(self.times.size)

    @property
    def sigma(self) -> float:
        return self.map.sigma

    @property
    def orientation(self) -> Orientation:
        return self.map.orientation

    def n(self, k: int) -> int:
        return int(self.times[k - 1])

    def wk(self, k: int) -> float:
        return float(self.w[self.times[k - 1]])

    def bk(self, k: int) -> float:
        return float(self.b_times[k - 1])

    def gap(self, k: int) -> float:
        """``d(w_{n_k}, w_{n_{k-1}})`` for ``k >= 2``."""
        return abs(self.wk(k) - self.wk(k - 1))

    def radius(self, k: int) -> float:
        """Inner window radius ``R_k`` for ``k >= 2``."""
        ratio = self.n(k - 1) * self.bk(k - 1) / (self.n(k) * self.bk(k))
        return ratio * self.gap(k) / (3.0 * self.C0 ** 3)

    def constants(self) -> dict:
        return counting_constants(self.C0, self.sigma, self.gamma)

    def anchors(self) -> np.ndarray:
        return self.w[self.times]

    def write_csv(self, orbit_path, anchor_path, stride: int = 1) -> None:
        b_all = scale_b(self.map.V, np.arange(max(self.times[0], 1), self.times[-1] + 1))
        with open(orbit_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "w_n", "b_n"])
            for i, n in enumerate(range(max(self.times[0], 1), self.times[-1] + 1)):
                if i % stride == 0:
                    wr.writerow([n, f"{self.w[n]:.17g}", f"{b_all[i]:.17g}"])
        with open(anchor_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "n_k", "w_n_k", "d_to_prev"])
            for k in range(1, self.K + 1):
                d = self.gap(k) if k > 1 else float("nan")
                wr.writerow([k, self.n(k), f"{self.wk(k):.17g}", f"{d:.17g}"])


def _schedule_times(n1: int, gamma: float, k_max: int) -> np.ndarray:
    times = [n1]
    for k in range(2, k_max + 1):
        times.append(max(times[-1] + 1, int(round(n1 * gamma ** (-(k - 1))))))
    return np.asarray(times, dtype=np.int64)


def _pair_ratio_max(w: np.ndarray, b: np.ndarray, i: np.ndarray, j: np.ndarray, s1: float) -> float:
    """Worst constant needed in the two-sided gap estimate over pairs ``i < j``."""
    d = np.abs(w[i] - w[j]) * s1
    steps = (j - i).astype(float)
    upper = d * i * b[i] / steps
    lower = steps / (j * b[j] * d)
    return float(max(np.max(upper), np.max(lower)))


def estimate_C0(T: IntervalMap, w: np.ndarray, floor: int, top: int, times=None,
                n_sample: int = 300) -> tuple[float, float]:
    """Return ``(C0, C0_raw)`` from orbit indices in ``[floor, top]``.

    ``C0_raw`` is the largest ratio found over every consecutive pair and every
    pair drawn from a deterministic log-spaced index sample.  The returned
    ``C0`` inflates the excess over 1 by 5%.
    """
    floor = max(int(floor), 1)
    s1 = T.sigma ** (1.0 + 1.0 / T.sigma)
    idx = np.arange(floor, top + 1)
    b = np.zeros(top + 1)
    b[floor:] = scale_b(T.V, idx.astype(float))
    raw = _pair_ratio_max(w, b, idx[:-1], idx[1:], s1)
    sample = np.unique(np.concatenate([
        np.round(np.geomspace(floor, top, n_sample)).astype(np.int64),
        np.asarray([] if times is None else times, dtype=np.int64)]))
    sample = sample[(sample >= floor) & (sample <= top)]
    ii, jj = np.triu_indices(sample.size, k=1)
    if ii.size:
        raw = max(raw, _pair_ratio_max(w, b, sample[ii], sample[jj], s1))
    raw = max(raw, 1.0 + 1e-15)
    return 1.0 + C0_EXCESS_INFLATION * (raw - 1.0), raw


def generate_schedule(T: IntervalMap, w0: float, gamma_time: float, k_max: int,
                      n1: int | None = None, max_orbit: int = 5_000_000) -> WSchedule:
    """Orbit of ``w0`` and times ``n_k = max(n_{k-1} + 1, round(n1 gamma^-(k-1)))``.

    ``n1`` defaults to the smallest time at which ``b`` is defined.
    """
    gamma = check_real("gamma_time", gamma_time, lo=0, hi=1, lo_open=True, hi_open=True)
    k_max = check_int("k_max", k_max, lo=2)
    n_min = 1.0 / float(T.V(T.V.valid_radius))
    n1 = math.ceil(n_min * (1 - 1e-12)) if n1 is None else check_int("n1", n1, lo=1)
    if n1 < n_min * (1 - 1e-12):
        raise ParameterError(f"n1 must be >= 1/V(valid_radius) = {n_min:.6g} so that b(n1) exists")
    last = max(n1 + k_max - 1, n1 * gamma ** (-(k_max - 1)))
    if last > max_orbit:
        raise ParameterError(f"n_k_max = {last:.6g} exceeds max_orbit = {max_orbit}")
    times = _schedule_times(n1, gamma, k_max)
    w = neutral_orbit(T, w0, int(times[-1]))
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise DomainError("orbit underflowed before n_k_max")
    return _finish(T, w, times, gamma, trimmed=0, w0=w0)


def _finish(T, w, times, gamma, trimmed, w0) -> WSchedule:
    C0, raw = estimate_C0(T, w, int(times[0]), int(times[-1]), times)
    b_times = scale_b(T.V, times.astype(float))
    return WSchedule(T, w, times, gamma, C0, raw, np.atleast_1d(b_times), trimmed, {"w0": w0})


def trim_head(sched: WSchedule, t: int) -> WSchedule:
    """Drop the first ``t`` schedule times and re-estimate ``C0`` on what remains."""
    t = check_int("t", t, lo=0)
    if t == 0:
        return sched
    if sched.K - t < 3:
        raise ParameterError("trim leaves fewer than 3 schedule times")
    return _finish(sched.map, sched.w, sched.times[t:], sched.gamma,
                   sched.trimmed + t, sched.extra.get("w0"))


@dataclass(frozen=True)
class AsymptoticReport:
    n: np.ndarray
    ratio_i: np.ndarray
    ratio_ii: np.ndarray
    k: np.ndarray
    ratio_iii: np.ndarray


def asymptotic_report(sched: WSchedule, checkpoints) -> AsymptoticReport:
    """Ratios that tend to 1 along the orbit and along the schedule.

    ``ratio_i`` compares ``w_n`` with ``1 / (sigma^(1/sigma) b(n))``.
    ``ratio_ii`` compares ``|w_n - w_{n+1}|`` with ``1 / (sigma^(1+1/sigma) n b(n))``.
    ``ratio_iii`` compares ``n_k b(n_k) / (n_{k+1} b(n_{k+1}))`` with ``gamma^(1+1/sigma)``.
    """
    s = sched.sigma
    n = np.asarray(checkpoints, dtype=np.int64)
    if np.any(n < 1) or np.any(n + 1 >= sched.w.size):
        raise ParameterError("checkpoints must lie in [1, len(orbit) - 2]")
    b = scale_b(sched.map.V, n.astype(float))
    r1 = sched.w[n] * s ** (1.0 / s) * b
    gap = np.abs(sched.w[n] - sched.w[n + 1])
    r2 = gap * s ** (1.0 + 1.0 / s) * n * b
    nb = sched.times * sched.b_times
    r3 = nb[:-1] / nb[1:] / sched.gamma ** (1.0 + 1.0 / s)
    return AsymptoticReport(n, r1, r2, np.arange(1, sched.K), r3)


@dataclass(frozen=True)
class GateReport:
    C0: float
    C0_raw: float
    gamma_eff: float
    gate1: bool
    gate2: bool
    gate3: bool
    min_time_ratio: float
    trim: int | None = None

    @property
    def passed(self) -> bool:
        return self.gate1 and self.gate2 and self.gate3


def check_gates(C0: float, gamma: float, sigma: float, time_ratios=()) -> tuple[bool, bool, bool]:
    """The three numerical preconditions of the construction."""
    g = gamma ** (1.0 + 1.0 / sigma)
    tr = np.asarray(time_ratios, dtype=float)
    gate1 = g > 6.0 / 7.0
    gate2 = 1.0 < C0 ** 2 <= 7.0 / 6.0 * g
    gate3 = bool(np.all(tr >= 0.5 * g)) if tr.size else True
    return bool(gate1), bool(gate2), gate3


def _gate_report(sched: WSchedule, trim=None) -> GateReport:
    nb = sched.times * sched.b_times
    ratios = nb[:-1] / nb[1:]
    g1, g2, g3 = check_gates(sched.C0, sched.gamma, sched.sigma, ratios)
    return GateReport(sched.C0, sched.C0_raw, sched.gamma ** (1 + 1 / sched.sigma),
                      g1, g2, g3, float(ratios.min()), trim)


def estimate_C0_and_gates(sched: WSchedule, max_trim: int | None = None) -> tuple[float, GateReport]:
    """``C0`` of the schedule and its gate verdicts.

    When a gate fails, the smallest head trim that makes all gates pass is
    searched and reported in ``GateReport.trim`` (``None`` if none exists).
    """
    rep = _gate_report(sched, 0)
    if rep.passed:
        return sched.C0, rep
    limit = sched.K - 3 if max_trim is None else min(max_trim, sched.K - 3)
    if rep.gate1:
        for t in range(1, limit + 1):
            if _gate_report(trim_head(sched, t)).passed:
                return sched.C0, replace(rep, trim=t)
    return sched.C0, replace(rep, trim=None)


@dataclass(frozen=True)
class WindowCount:
    k: int
    count: int
    bound_C1: float
    bound_C2: float
    too_small: bool

    @property
    def ok_C1(self) -> bool:
        return self.count >= self.bound_C1

    @property
    def ok_C2(self) -> bool:
        return self.count >= self.bound_C2


def window_count(sched: WSchedule, k: int, z: float | None = None) -> WindowCount:
    """Count orbit points of ``z`` in the annulus ``[R_k, d/3]`` around the anchor.

    The anchor is ``w_{n_k}`` when the map moves toward 0 and ``w_{n_{k-1}}``
    otherwise; ``d = d(w_{n_k}, w_{n_{k-1}})`` and ``j`` ranges over
    ``0 <= j < n_k - n_{k-1}``.  The default ``z`` is the far end of the
    segment, so the orbit is read from the table.
    """
    k = check_int("k", k, lo=2)
    if k > sched.K:
        raise ParameterError(f"k must be <= K = {sched.K}")
    m = sched.n(k) - sched.n(k - 1)
    toward = sched.orientation is Orientation.TOWARD
    anchor = sched.wk(k) if toward else sched.wk(k - 1)
    if z is None:
        if toward:
            pts = sched.w[sched.n(k - 1):sched.n(k)]
        else:
            pts = sched.w[sched.n(k):sched.n(k - 1):-1]
    else:
        pts = np.empty(m)
        x = float(z)
        for j in range(m):
            pts[j] = x
            x = eval_map(sched.map, x)
    d = sched.gap(k)
    R = sched.radius(k)
    dist = np.abs(pts - anchor)
    count = int(np.count_nonzero((dist >= R) & (dist <= d / 3.0)))
    c = sched.constants()
    b1 = c["C1"] * sched.n(k - 1) * sched.bk(k - 1) * d
    V_anchor = float(sched.map.V(sched.wk(k)))
    b2 = c["C2"] / V_anchor
    return WindowCount(k, count, b1, b2, count == 0)


@dataclass(frozen=True)
class OnsetReport:
    rows: list
    onset_C1: int | None
    onset_C2: int | None


def _onset(flags: list[bool], ks: list[int]) -> int | None:
    onset = None
    for k, ok in zip(reversed(ks), reversed(flags)):
        if not ok:
            break
        onset = k
    return onset


def window_onsets(sched: WSchedule) -> OnsetReport:
    """Window counts for every ``k >= 2`` and the first index after which each bound holds."""
    rows = [window_count(sched, k) for k in range(2, sched.K + 1)]
    ks = [r.k for r in rows]
    return OnsetReport(rows, _onset([r.ok_C1 for r in rows], ks), _onset([r.ok_C2 for r in rows], ks))


def log_checkpoints(lo: int, hi: int, num: int) -> np.ndarray:
    return np.unique(np.round(np.geomspace(lo, hi, num)).astype(np.int64))


__all__ = [
    "WSchedule", "scale_b", "neutral_orbit", "generate_schedule", "trim_head",
    "asymptotic_report", "estimate_C0", "estimate_C0_and_gates", "check_gates",
    "window_count", "window_onsets", "counting_constants", "log_checkpoints",
]
