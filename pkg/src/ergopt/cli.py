"""Configuration-driven experiment runner.

Usage::

    ergopt <command> [--config PATH] [--out DIR] [--threads N] [--verbose]

Commands: asymptotics, gates, obstruction, calibrate, assumption-a, omega,
subaction, report.  Each command writes ``<out>/<command>/`` containing its
CSV tables, ``verdict.json`` and ``manifest.json``.  Exit status is 0 on
success, 1 when the command's certificate fails (the verdict is still
written) and 2 for an invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from ._validation import DomainError, ParameterError
from .ergodic import estimate_max_average, periodic_orbits
from .moduli import KernelPotential, liminf_ratio, random_kernel_potential
from .obstruction import (
    build_potential,
    calibrate_xi,
    sample_points,
    stopping_table,
    subaction_violation_certificate,
    verify_positive_sums,
)
from .orbits import (
    asymptotic_report,
    estimate_C0_and_gates,
    generate_schedule,
    log_checkpoints,
    scale_b,
    trim_head,
    window_onsets,
)
from .subaction import (
    backward_pairing_check,
    build_Omega,
    check_assumption_A,
    compute_subaction,
    expansion_data,
    ETA0_LATTICE,
    XI0_LATTICE,
    grid_eps,
    growth_exponents,
    verify_subaction,
)

log = logging.getLogger("ergopt")

COMMANDS = ("asymptotics", "gates", "obstruction", "calibrate", "assumption-a", "omega",
            "subaction", "report")

CSV_VERSION = 1
# Column layout of every table, recorded in each manifest.
CSV_COLUMNS = {
    "orbit.csv": ["n", "w_n", "b_n"],
    "anchors.csv": ["k", "n_k", "w_n_k", "d_to_prev"],
    "ratios.csv": ["n", "ratio_i", "ratio_ii"],
    "time_ratios.csv": ["k", "ratio_iii"],
    "windows.csv": ["k", "count", "bound_C1", "bound_C2", "ok_C1", "ok_C2"],
    "certificate.csv": ["k", "w_n_k", "qualifying", "segment_sum", "window_sum", "bound",
                        "running_min"],
    "stopping.csv": ["x", "k", "p", "q", "n", "positive_part", "negative_part", "sum", "escaped"],
    "calibration.csv": ["k", "ratio"],
    "exponents.csv": ["xi0", "eta0", "min_exponent"],
    "omega.csv": ["x", "theta0", "theta1", "theta2_star", "Omega"],
    "dual.csv": ["y", "theta1_star", "theta2"],
    "Omega.csv": ["x", "Omega"],
    "U.csv": ["x", "U"],
}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path: Path, rows) -> None:
    cols = CSV_COLUMNS[path.name]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


# -- shared pipeline pieces ---------------------------------------------------

def _schedule(cfg):
    T = cfgmod.build_map(cfg)
    s = cfg["schedule"]
    sched = generate_schedule(T, s["w0"], s["gamma_time"], s["k_max"], n1=s["n1"])
    return T, sched


def _gated_schedule(cfg):
    T, sched = _schedule(cfg)
    _, rep = estimate_C0_and_gates(sched)
    used = sched
    if not rep.passed and rep.trim and cfg["schedule"]["auto_trim"]:
        used = trim_head(sched, rep.trim)
    gates = {"gate1": rep.gate1, "gate2": rep.gate2, "gate3": rep.gate3, "passed": rep.passed,
             "C0": used.C0, "C0_raw": used.C0_raw, "gamma_eff": rep.gamma_eff,
             "min_time_ratio": rep.min_time_ratio, "trim": rep.trim or 0,
             "usable": rep.passed or used is not sched}
    return T, used, gates


def _anchor_rows(sched):
    rows = []
    for k in range(1, sched.K + 1):
        d = sched.gap(k) if k > 1 else math.nan
        rows.append((k + sched.trimmed, sched.n(k), sched.wk(k), d))
    return rows


def _orbit_rows(sched, max_rows=10_000):
    n = sched.w.size
    stride = max(1, -(-n // max_rows))
    idx = np.arange(0, n, stride)
    V = sched.map.V
    ok = idx >= 1.0 / float(V(V.valid_radius))
    b = np.full(idx.size, math.nan)
    b[ok] = scale_b(V, idx[ok].astype(float))
    return zip(idx, sched.w[idx], b)


# -- commands -----------------------------------------------------------------

def cmd_asymptotics(cfg, out: Path) -> dict:
    _, sched = _schedule(cfg)
    n_cp = cfg["asymptotics"]["checkpoints"]
    cps = log_checkpoints(int(sched.times[0]), int(sched.times[-1]) - 1, n_cp)
    rep = asymptotic_report(sched, cps)
    write_csv(out / "orbit.csv", _orbit_rows(sched))
    write_csv(out / "anchors.csv", _anchor_rows(sched))
    write_csv(out / "ratios.csv", zip(rep.n, rep.ratio_i, rep.ratio_ii))
    write_csv(out / "time_ratios.csv", zip(rep.k, rep.ratio_iii))
    last_i, last_ii = float(rep.ratio_i[-1]), float(rep.ratio_ii[-1])
    dev = lambda r: np.abs(np.asarray(r) - 1.0)
    mono = bool(np.all(np.diff(dev(rep.ratio_i)) <= 1e-12) and np.all(np.diff(dev(rep.ratio_ii)) <= 1e-12))
    ok = abs(last_i - 1) <= 0.01 and abs(last_ii - 1) <= 0.01
    return {"passed": ok, "last_n": int(rep.n[-1]), "last_ratio_i": last_i,
            "last_ratio_ii": last_ii, "last_ratio_iii": float(rep.ratio_iii[-1]),
            "monotone_toward_1": mono, "tolerance": 0.01}


def cmd_gates(cfg, out: Path) -> dict:
    _, sched, gates = _gated_schedule(cfg)
    on = window_onsets(sched)
    write_csv(out / "anchors.csv", _anchor_rows(sched))
    write_csv(out / "windows.csv", ((r.k + sched.trimmed, r.count, r.bound_C1, r.bound_C2,
                                     r.ok_C1, r.ok_C2) for r in on.rows))
    shift = lambda k: None if k is None else k + sched.trimmed
    return {"passed": bool(gates["usable"] and on.onset_C1 is not None and on.onset_C2 is not None),
            "gates": gates, "constants": sched.constants(),
            "onset_C1": shift(on.onset_C1), "onset_C2": shift(on.onset_C2)}


def _potential(cfg):
    T, sched, gates = _gated_schedule(cfg)
    omega = cfgmod.build_modulus(cfg)
    P = build_potential(sched, omega)
    return T, sched, gates, omega, P


def _stopping_rows(st):
    return zip(st.x, st.k, st.p, st.q, st.n, st.pos, st.neg, st.sums, st.escaped)


def cmd_calibrate(cfg, out: Path) -> dict:
    _, sched, gates, _, P = _potential(cfg)
    cal = calibrate_xi(P)
    P = P.with_xi(cal.xi_star)
    st = stopping_table(P, sample_points(P, cfg["obstruction"]["samples"], cfg["seed"]))
    write_csv(out / "calibration.csv", zip(cal.ks + sched.trimmed, cal.ratios))
    write_csv(out / "stopping.csv", _stopping_rows(st))
    max_sum = float(st.sums.max())
    return {"passed": bool(not cal.flagged and max_sum <= 1e-12 and not st.escaped.any()),
            "xi_star": cal.xi_star, "sup_ratio": cal.sup_ratio, "prefactor": cal.prefactor,
            "drift": cal.drift, "drift_flagged": cal.flagged, "max_stopped_sum": max_sum,
            "escaped": int(st.escaped.sum()), "empirical_critical_xi": st.critical_xi(),
            "gates": gates, "regime": P.regime}


def cmd_obstruction(cfg, out: Path) -> dict:
    T, sched, gates, omega, P = _potential(cfg)
    o = cfg["obstruction"]
    if o["xi"] == "auto":
        cal = calibrate_xi(P)
        xi, flagged = cal.xi_star, cal.flagged
    else:
        xi, flagged = float(o["xi"]), False
    P = P.with_xi(xi)
    sums = verify_positive_sums(P)
    est = estimate_max_average(T, P, o["max_period"], o["orbit_budget"], seed=cfg["seed"])
    st = stopping_table(P, sample_points(P, o["samples"], cfg["seed"]))
    K = None if o["K"] is None else int(o["K"]) - sched.trimmed
    cert = subaction_violation_certificate(P, sums, est.value, K=K)
    write_csv(out / "certificate.csv", ((r.k + sched.trimmed, sched.wk(r.k), r.qualifying,
                                         r.segment_sum, r.window_sum, r.bound, r.running_min)
                                        for r in sums.rows if K is None or r.k <= K))
    write_csv(out / "stopping.csv", _stopping_rows(st))
    reasons = list(cert.reasons)
    insufficient = not cert.rows
    if insufficient:
        reasons.append("insufficient depth: no qualifying k within K")
    if not gates["usable"]:
        reasons.append("schedule gates fail")
    if float(st.sums.max()) > 1e-12:
        reasons.append("a stopped Birkhoff sum is positive")
    certified = bool(cert.certified and not insufficient and gates["usable"] and not reasons)
    mins = [r.running_min for r in sums.qualifying()][-10:]
    lim = liminf_ratio(omega, T.V)
    return {
        "passed": certified,
        "verdict": "obstruction certified" if certified else "no obstruction certified",
        "reasons": reasons,
        "C5_empirical": cert.C5,
        "xi_star": xi,
        "xi_drift_flagged": flagged,
        "gates": gates,
        "m_estimate": est.value,
        "m_witness": est.witness,
        "regime": P.regime,
        "liminf_tag": lim.tag,
        "running_min_spread": sums.spread,
        "running_min_decay": (mins[0] / mins[-1]) if mins and mins[-1] > 0 else math.inf,
        "window_bounds_ok": sums.bounds_ok,
        "max_stopped_sum": float(st.sums.max()),
        "insufficient_depth": insufficient,
    }


def cmd_assumption_a(cfg, out: Path) -> dict:
    T = cfgmod.build_map(cfg)
    omega = cfgmod.build_modulus(cfg)
    A = check_assumption_A(omega, T.V)
    write_csv(out / "exponents.csv", _exponent_rows(omega, T.V))
    return {"passed": A.holds, "gamma": A.gamma, "xi0": A.xi0, "eta0": A.eta0,
            "min_exponent": A.gamma_min, "violation": A.violation}


def _exponent_rows(omega, V):
    h = np.geomspace(1e-300, max(ETA0_LATTICE), 3000)
    xi = np.linspace(1.0, max(XI0_LATTICE), 41)[1:]
    g = growth_exponents(omega, V, h, xi)
    g = np.where(np.isfinite(g), g, -np.inf)
    rows = []
    for xi0 in sorted(XI0_LATTICE, reverse=True):
        for eta0 in sorted(ETA0_LATTICE, reverse=True):
            rows.append((xi0, eta0, float(g[np.ix_(xi <= xi0 * (1 + 1e-12), h < eta0)].min())))
    return rows


def cmd_omega(cfg, out: Path) -> dict:
    T = cfgmod.build_map(cfg)
    omega = cfgmod.build_modulus(cfg)
    o = cfg["omega"]
    A = check_assumption_A(omega, T.V)
    P = build_Omega(omega, T.V, o["grid_size"], slope_cap=o["slope_cap"])
    write_csv(out / "omega.csv", zip(P.xs, P.theta0, P.theta1, P.theta2_star, P.Omega.ys))
    write_csv(out / "dual.csv", zip(P.dual, P.theta1_star, P.theta2))
    unit = P.xs <= 1.0
    slack01 = float(np.min(P.theta1[unit] - P.theta0[unit]))
    slack12 = float(np.min(P.theta2_star[unit] - P.theta1[unit]))
    om0 = float(P.Omega.ys[0])
    ok = slack01 >= -1e-10 and slack12 >= -1e-10 and abs(om0) <= 1e-10
    return {"passed": bool(ok), "assumption_A": A.holds, "chain_slack_theta0_theta1": slack01,
            "chain_slack_theta1_theta2_star": slack12, "Omega_at_0": om0,
            "Omega_at_1": float(P(1.0)), "slope_cap": P.cap}


def _subaction_potential(cfg, omega):
    pot = cfg["subaction"]["potential"]
    if pot["kind"] == "zero":
        return KernelPotential(omega, np.zeros(0), np.zeros(0)), 0.0
    if pot["kind"] == "constant":
        v = float(pot["value"])
        return (lambda x: np.full(np.shape(x), v) if np.ndim(x) else v), 0.0
    f = random_kernel_potential(omega, pot["terms"], np.random.default_rng(cfg["seed"]))
    return f, f.norm_bound


def cmd_subaction(cfg, out: Path) -> dict:
    T = cfgmod.build_map(cfg)
    omega = cfgmod.build_modulus(cfg)
    sa = cfg["subaction"]
    A = check_assumption_A(omega, T.V)
    if not A.holds:
        return {"passed": False, "reason": "Assumption A fails", "violation": A.violation}
    E = expansion_data(T, A)
    pipe = build_Omega(omega, T.V, cfg["omega"]["grid_size"], slope_cap=cfg["omega"]["slope_cap"])
    f, fn = _subaction_potential(cfg, omega)
    orbs = periodic_orbits(T, sa["max_period"])
    est = estimate_max_average(T, f, sa["max_period"], sa["orbit_budget"], seed=cfg["seed"],
                               orbits=orbs)
    grid = np.linspace(0.0, 1.0, sa["grid_size"])
    eps = max(grid_eps(fn, omega, grid), 1e-12) if sa["eps"] == "auto" else float(sa["eps"])
    res = compute_subaction(T, f, est.value, grid, eps=eps, k_cap=sa["k_cap"], f_norm=fn,
                            expansion=E, pipeline=pipe)
    chk = verify_subaction(T, f, res.U, est.value, pipe, fn, E, eps=eps)
    pair = backward_pairing_check(T, pipe, omega, E, n_pairs=sa["pairs"], seed=cfg["seed"])
    write_csv(out / "U.csv", zip(res.U.xs, res.U.ys))
    write_csv(out / "Omega.csv", zip(pipe.xs, pipe.Omega.ys))
    ok = res.converged and chk.passed and pair.passed and res.bound_ok is not False
    return {"passed": bool(ok), "max_residual": chk.max_residual, "tol": chk.tol,
            "k_used": res.k_used, "converged": res.converged, "eps": eps,
            "omega_norm_estimate": chk.U_seminorm, "bound": chk.seminorm_bound,
            "sup_bound": res.bound, "sup_bound_ok": res.bound_ok, "m_estimate": est.value,
            "f_norm": fn, "pairing_worst_slack": pair.worst_slack, "pairing_passed": pair.passed,
            "expansion": {"rho_T": E.rho_T, "C7": E.C7, "C8": E.C8, "lambda": E.lam,
                          "gamma_A": E.gamma, "xi0": E.xi0, "eta0": E.eta0,
                          "rho_T_omega": E.rho_T_omega, "cover": E.cover}}


def cmd_report(cfg, out: Path) -> dict:
    verdicts = {}
    for name in COMMANDS:
        p = out.parent / name / "verdict.json"
        if name != "report" and p.exists():
            verdicts[name] = json.loads(p.read_text())
    if not verdicts:
        return {"passed": False, "reason": "no verdicts found", "commands": {}}
    summary = {n: bool(v.get("passed")) for n, v in verdicts.items()}
    write_json(out / "report.json", {"summary": summary, "verdicts": verdicts})
    return {"passed": all(summary.values()), "commands": summary}


HANDLERS = {
    "asymptotics": cmd_asymptotics,
    "gates": cmd_gates,
    "obstruction": cmd_obstruction,
    "calibrate": cmd_calibrate,
    "assumption-a": cmd_assumption_a,
    "omega": cmd_omega,
    "subaction": cmd_subaction,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ergopt", description="Sub-action existence and obstruction experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, default=None, help="YAML or JSON configuration file")
    p.add_argument("--out", type=Path, default=Path("out"), help="output root directory")
    p.add_argument("--threads", type=int, default=1, help="thread budget (recorded; kernels run single-threaded)")
    p.add_argument("--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads: must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = cfgmod.load(args.config) if args.config else cfgmod.validate({})
    except cfgmod.ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    out = args.out / args.command
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    log.info("running %s", args.command)
    try:
        verdict = HANDLERS[args.command](cfg, out)
    except ParameterError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        verdict = {"passed": False, "error": str(exc)}
    wall = time.perf_counter() - t0
    verdict = {"command": args.command, **verdict}
    write_json(out / "verdict.json", verdict)
    tables = sorted(p.name for p in out.glob("*.csv"))
    write_json(out / "manifest.json", {
        "command": args.command,
        "config": cfg,
        "seed": cfg["seed"],
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "threads": args.threads,
        "wall_time_s": wall,
        "csv_version": CSV_VERSION,
        "tables": {t: CSV_COLUMNS[t] for t in tables},
    })
    log.info("%s finished in %.2f s, passed=%s", args.command, wall, verdict["passed"])
    print(json.dumps({"command": args.command, "passed": bool(verdict["passed"])}))
    return 0 if verdict["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
