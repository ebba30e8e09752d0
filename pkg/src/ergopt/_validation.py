"""Small input-validation helpers shared across modules."""

from __future__ import annotations

import numbers

import numpy as np


class ParameterError(ValueError):
    """A parameter falls outside its admissible range."""


class DomainError(ValueError):
    """A point lies outside the domain or image where an operation is defined."""


def check_real(name: str, value, *, lo=None, hi=None, lo_open=False, hi_open=False) -> float:
    """Return ``value`` as float after checking ``lo <= value <= hi``.

    Open bounds are requested with ``lo_open`` / ``hi_open``.  The error names
    the parameter and the violated constraint.
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ParameterError(f"{name} must be a real number (got {value!r})")
    v = float(value)
    if not np.isfinite(v):
        raise ParameterError(f"{name} must be finite (got {v})")
    if lo is not None:
        if (lo_open and not v > lo) or (not lo_open and not v >= lo):
            op = ">" if lo_open else ">="
            raise ParameterError(f"{name} must satisfy {name} {op} {lo} (got {v})")
    if hi is not None:
        if (hi_open and not v < hi) or (not hi_open and not v <= hi):
            op = "<" if hi_open else "<="
            raise ParameterError(f"{name} must satisfy {name} {op} {hi} (got {v})")
    return v


def check_int(name: str, value, *, lo=None) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ParameterError(f"{name} must be an integer (got {value!r})")
    v = int(value)
    if lo is not None and v < lo:
        raise ParameterError(f"{name} must satisfy {name} >= {lo} (got {v})")
    return v


def check_sorted_grid(name: str, xs) -> np.ndarray:
    """Return a float array after checking it is 1-d, finite and strictly increasing."""
    arr = np.asarray(xs, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ParameterError(f"{name} must be a 1-d array with at least two nodes")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} must contain only finite values")
    if np.any(np.diff(arr) <= 0):
        raise ParameterError(f"{name} must be strictly increasing")
    return arr
