"""Input validation helpers shared by all modules."""

import math
from fractions import Fraction

import numpy as np

from .exceptions import SpecError

STOCHASTIC_ATOL = 1e-12


def check_square_matrix(A, name="matrix"):
    try:
        A = np.asarray(A, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{name} must be numeric: {exc}") from None
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise SpecError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise SpecError(f"{name} has non-finite entries")
    return A


def check_transition_matrix(P, atol=STOCHASTIC_ATOL):
    """Validate a row-stochastic matrix and return it as a float array."""
    P = check_square_matrix(P, "transition matrix")
    if np.any(P < 0) or np.any(P > 1):
        bad = np.argwhere((P < 0) | (P > 1))[0]
        raise SpecError(f"transition entry {tuple(int(i) for i in bad)} outside [0, 1]")
    dev = np.abs(P.sum(axis=1) - 1.0)
    if np.any(dev > atol):
        row = int(np.argmax(dev))
        raise SpecError(f"row {row} sums to {P[row].sum()!r}, not 1 (tolerance {atol})")
    return P


def check_probability_vector(v, size=None, name="probability vector", atol=STOCHASTIC_ATOL):
    try:
        v = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{name} must be numeric: {exc}") from None
    if v.ndim != 1:
        raise SpecError(f"{name} must be one-dimensional")
    if size is not None and v.shape[0] != size:
        raise SpecError(f"{name} has length {v.shape[0]}, expected {size}")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise SpecError(f"{name} must be finite and nonnegative")
    if abs(v.sum() - 1.0) > atol:
        raise SpecError(f"{name} sums to {v.sum()!r}, not 1")
    return v


def check_unit_interval(x, name, open_left=False, open_right=False):
    x = check_real(x, name)
    lo_ok = x > 0 if open_left else x >= 0
    hi_ok = x < 1 if open_right else x <= 1
    if not (lo_ok and hi_ok):
        lb = "(" if open_left else "["
        rb = ")" if open_right else "]"
        raise SpecError(f"{name}={x!r} must lie in {lb}0, 1{rb}")
    return x


def check_real(x, name):
    try:
        x = float(x)
    except (TypeError, ValueError):
        raise SpecError(f"{name} must be a real number, got {x!r}") from None
    if math.isnan(x):
        raise SpecError(f"{name} is NaN")
    return x


def check_positive_int(k, name, allow_zero=False):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        if isinstance(k, float) and k.is_integer():
            k = int(k)
        else:
            raise SpecError(f"{name} must be an integer, got {k!r}")
    k = int(k)
    if k < 0 or (k == 0 and not allow_zero):
        raise SpecError(f"{name} must be {'nonnegative' if allow_zero else 'positive'}, got {k}")
    return k


def rationalize(x, max_denominator=10**6):
    """Exact rational whose float is ``x``, or None when no small one exists."""
    fr = Fraction(float(x)).limit_denominator(max_denominator)
    return fr if float(fr) == float(x) else None


def rational_array(A, name="matrix", max_denominator=10**6):
    """Convert a float array to a nested list of Fractions, exactly."""
    A = np.asarray(A, dtype=float)
    out = np.empty(A.shape, dtype=object)
    for idx, x in np.ndenumerate(A):
        fr = rationalize(x, max_denominator)
        if fr is None:
            raise SpecError(f"{name} entry {idx}={x!r} has no rational form with denominator <= {max_denominator}")
        out[idx] = fr
    return out
