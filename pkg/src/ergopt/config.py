"""Run configuration: YAML (or JSON) mapping, validated into plain dicts with defaults."""

from __future__ import annotations

import copy
import numbers
from pathlib import Path

import yaml

from ._validation import ParameterError
from .maps import make_map
from .moduli import make_omega_alpha_beta, make_omega_log


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


DEFAULTS = {
    "seed": 0,
    "map": {"family": "mp", "s": 0.5},
    "modulus": {"kind": "alpha_beta", "alpha": 0.3, "beta": 0.0},
    "schedule": {"w0": 0.25, "gamma_time": 0.96, "n1": 1500, "k_max": 110, "auto_trim": True},
    "asymptotics": {"checkpoints": 16},
    "obstruction": {"xi": "auto", "K": None, "samples": 1000, "max_period": 12,
                    "orbit_budget": 100_000},
    "omega": {"grid_size": 4000, "slope_cap": "hull"},
    "subaction": {"grid_size": 513, "eps": "auto", "k_cap": 10_000, "max_period": 12,
                  "orbit_budget": 100_000, "pairs": 10_000,
                  "potential": {"kind": "random", "terms": 5}},
}

_NUMBER = numbers.Real
MAX_ORBIT = 5_000_000


def _merge(base: dict, over: dict, prefix: str) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(path, "unknown key")
        if isinstance(base[key], dict) and key not in ("map", "modulus", "potential"):
            if not isinstance(val, dict):
                raise ConfigError(path, "expected a mapping")
            out[key] = _merge(base[key], val, path + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _real(cfg: dict, key: str, path: str, lo=None, hi=None, allow=(), open_=False) -> None:
    v = cfg[key]
    if v in allow:
        return
    if isinstance(v, bool) or not isinstance(v, _NUMBER):
        raise ConfigError(f"{path}.{key}", f"expected a number (got {v!r})")
    if open_:
        bad = (lo is not None and v <= lo) or (hi is not None and v >= hi)
        span = f"({lo}, {hi})"
    else:
        bad = (lo is not None and v < lo) or (hi is not None and v > hi)
        span = f"[{lo}, {hi}]"
    if bad:
        raise ConfigError(f"{path}.{key}", f"out of range {span} (got {v})")


def _int(cfg: dict, key: str, path: str, lo=None, allow=()) -> None:
    v = cfg[key]
    if v in allow:
        return
    if isinstance(v, bool) or not isinstance(v, numbers.Integral):
        raise ConfigError(f"{path}.{key}", f"expected an integer (got {v!r})")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}.{key}", f"must be >= {lo} (got {v})")


def validate(raw: dict | None) -> dict:
    """Merge ``raw`` over the defaults and check every field."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a mapping")
    cfg = _merge(DEFAULTS, raw, "")
    _int(cfg, "seed", "<root>", lo=0)
    build_map(cfg)
    build_modulus(cfg)
    s = cfg["schedule"]
    _real(s, "w0", "schedule", lo=0, hi=1, open_=True)
    _real(s, "gamma_time", "schedule", lo=0, hi=1, open_=True)
    _int(s, "n1", "schedule", lo=1)
    _int(s, "k_max", "schedule", lo=5)
    last = s["n1"] * s["gamma_time"] ** (-(s["k_max"] - 1))
    if last > MAX_ORBIT:
        raise ConfigError("schedule.k_max", f"last schedule time {last:.3g} exceeds {MAX_ORBIT:.0e}")
    if not isinstance(s["auto_trim"], bool):
        raise ConfigError("schedule.auto_trim", "expected true or false")
    _int(cfg["asymptotics"], "checkpoints", "asymptotics", lo=2)
    o = cfg["obstruction"]
    _real(o, "xi", "obstruction", lo=0, allow=("auto",))
    _int(o, "K", "obstruction", lo=2, allow=(None,))
    _int(o, "samples", "obstruction", lo=1)
    _int(o, "max_period", "obstruction", lo=1)
    _int(o, "orbit_budget", "obstruction", lo=0)
    om = cfg["omega"]
    _int(om, "grid_size", "omega", lo=8)
    _real(om, "slope_cap", "omega", lo=0, allow=("hull",))
    sa = cfg["subaction"]
    _int(sa, "grid_size", "subaction", lo=3)
    _real(sa, "eps", "subaction", lo=0, allow=("auto",))
    _int(sa, "k_cap", "subaction", lo=1)
    _int(sa, "max_period", "subaction", lo=1)
    _int(sa, "orbit_budget", "subaction", lo=0)
    _int(sa, "pairs", "subaction", lo=1)
    pot = sa["potential"]
    if not isinstance(pot, dict) or pot.get("kind") not in ("zero", "constant", "random"):
        raise ConfigError("subaction.potential.kind", "expected zero, constant or random")
    if pot["kind"] == "random":
        pot.setdefault("terms", 5)
        _int(pot, "terms", "subaction.potential", lo=1)
    if pot["kind"] == "constant":
        pot.setdefault("value", 0.0)
        _real(pot, "value", "subaction.potential")
    return cfg


def build_map(cfg: dict):
    spec = dict(cfg["map"]) if isinstance(cfg["map"], dict) else None
    if spec is None or "family" not in spec:
        raise ConfigError("map.family", "missing map family")
    family = spec.pop("family")
    if family == "custom":
        raise ConfigError("map.family", "custom maps are not available from configuration files")
    try:
        return make_map(family, **spec)
    except ParameterError as exc:
        raise ConfigError("map", str(exc)) from exc
    except TypeError as exc:
        raise ConfigError("map", f"unexpected parameters for {family!r}: {exc}") from exc


def build_modulus(cfg: dict):
    spec = dict(cfg["modulus"]) if isinstance(cfg["modulus"], dict) else None
    if spec is None or "kind" not in spec:
        raise ConfigError("modulus.kind", "missing modulus kind")
    kind = spec.pop("kind")
    try:
        if kind == "alpha_beta":
            return make_omega_alpha_beta(spec.pop("alpha", 0.3), spec.pop("beta", 0.0))
        if kind == "log":
            return make_omega_log(spec.pop("k", 1.0))
    except ParameterError as exc:
        raise ConfigError("modulus", str(exc)) from exc
    raise ConfigError("modulus.kind", f"expected alpha_beta or log (got {kind!r})")


def load(path) -> dict:
    """Read and validate a configuration file."""
    p = Path(path)
    try:
        raw = yaml.safe_load(p.read_text())
    except FileNotFoundError as exc:
        raise ConfigError("--config", f"file not found: {p}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"not valid YAML/JSON: {exc}") from exc
    return validate(raw)
