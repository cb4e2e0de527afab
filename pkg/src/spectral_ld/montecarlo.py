"""Trajectory sampling, empirical tail estimates and bound-vs-empirical reports.

Random numbers come from a counter-based generator so that every draw is
a pure function of ``(seed, sample index, step)``:

* ``mix64`` is the SplitMix64 finalizer
  (``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
  z *= 0x94D049BB133111EB; z ^= z >> 31``, arithmetic mod 2^64);
* the per-sample key is ``b = mix64(seed ^ mix64(index))``;
* draw ``t`` (``t = 0`` picks the initial state) is
  ``mix64(b + (t + 1) * 0x9E3779B97F4A7C15)``, mapped to ``[0, 1)`` by
  keeping the top 53 bits;
* states are drawn by inverse CDF: the first ``j`` with ``u < cdf[j]``,
  ``cdf`` being the row cumulative sum divided by its last entry.

Occupation sums are accumulated on an integer lattice whenever ``phi``
takes rational values with denominator at most 64, so the threshold
``A_n >= eta`` is decided exactly (ties are hits).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from scipy.stats import binomtest

from ._validation import check_positive_int, check_unit_interval
from .chain_model import PhiFunction, Projection, _measure_of, averaging_operator, check_property_m
from .exceptions import BoundViolationError, InfeasibleError, PropertyMError, SpecError
from .ld_bounds import LDQuery, kl_div, ld_tail_optimize
from .spectral import l20_norm

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

CI_LEVEL = 0.99
DP_CELL_LIMIT = 10**7
LATTICE_MAX_DENOMINATOR = 64
LATTICE_MAX_VALUES = 32
CHUNK = 1 << 16

CSV_HEADER = ("n", "p_hat", "ci_low", "ci_high", "exact_dp", "bound", "k_used", "rate", "chernoff_rate")


def mix64(z):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z ^ (z >> np.uint64(30))
        z = z * _M1
        z = z ^ (z >> np.uint64(27))
        z = z * _M2
        z = z ^ (z >> np.uint64(31))
    return z


def sample_keys(seed, indices):
    idx = np.asarray(indices, dtype=np.uint64)
    return mix64(np.uint64(int(seed) & _MASK64) ^ mix64(idx))


def uniform_draws(keys, t):
    """Draw number ``t`` for each key, as floats in ``[0, 1)``."""
    with np.errstate(over="ignore"):
        ctr = keys + np.uint64((t + 1) * int(GOLDEN) & _MASK64)
    z = mix64(ctr)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _cdf_rows(M):
    C = np.cumsum(np.atleast_2d(M), axis=1)
    return C / C[:, -1:]


def _inverse_cdf(C, u):
    # C: (batch, S) cumulative rows; first j with u < C[j]
    j = np.sum(C <= u[:, None], axis=1)
    return np.minimum(j, C.shape[1] - 1)


@dataclass(frozen=True)
class SimConfig:
    """``start`` is ``"stationary"`` or a fixed state index."""

    n: int
    eta: float
    samples: int
    seed: int
    start: Union[str, int] = "stationary"

    def __post_init__(self):
        object.__setattr__(self, "n", check_positive_int(self.n, "n"))
        object.__setattr__(self, "samples", check_positive_int(self.samples, "samples"))
        object.__setattr__(self, "eta", check_unit_interval(self.eta, "eta"))
        s = int(self.seed)
        if not 0 <= s <= _MASK64:
            raise SpecError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", s)
        if self.start != "stationary":
            object.__setattr__(self, "start", check_positive_int(self.start, "start", allow_zero=True))


@dataclass(frozen=True)
class TailEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    hits: int
    samples: int

    @classmethod
    def from_counts(cls, hits, samples):
        hits, samples = int(hits), int(samples)
        ci = binomtest(hits, samples).proportion_ci(confidence_level=CI_LEVEL, method="exact")
        p_hat = hits / samples
        return cls(p_hat, min(float(ci.low), p_hat), max(float(ci.high), p_hat), hits, samples)


def _initial_cdf(chain, start):
    if start == "stationary":
        return _cdf_rows(_measure_of(chain))[0]
    if start >= chain.n_states:
        raise SpecError(f"start state {start} out of range")
    return None


def _run_paths(chain, seed, indices, length, start, visit=None):
    """Simulate paths for the given sample indices; ``visit(t, states)`` is called per time."""
    keys = sample_keys(seed, indices)
    init = _initial_cdf(chain, start)
    if init is None:
        states = np.full(len(indices), int(start), dtype=np.int64)
    else:
        u = uniform_draws(keys, 0)
        states = _inverse_cdf(np.broadcast_to(init, (len(indices), init.size)), u)
    C = _cdf_rows(chain.P)
    if visit is not None:
        visit(0, states)
    for t in range(1, length):
        u = uniform_draws(keys, t)
        states = _inverse_cdf(C[states], u)
        if visit is not None:
            visit(t, states)
    return states


def sample_path(chain, cfg: SimConfig, length=None, index=0):
    """State sequence of sample ``index``; deterministic in ``(cfg.seed, index)``."""
    length = cfg.n if length is None else check_positive_int(length, "length")
    out = np.empty(length, dtype=np.int64)

    def visit(t, states):
        out[t] = states[0]

    _run_paths(chain, cfg.seed, np.array([index]), length, cfg.start, visit)
    return out


# -- occupation lattice -------------------------------------------------------------


def _lattice(phi_values):
    """Integer numerators and common denominator for ``phi``, or None if not representable."""
    vals = np.asarray(phi_values, dtype=float)
    fracs = []
    for v in vals:
        fr = Fraction(float(v)).limit_denominator(LATTICE_MAX_DENOMINATOR)
        if float(fr) != float(v):
            return None
        fracs.append(fr)
    if len(set(fracs)) > LATTICE_MAX_VALUES:
        return None
    q = 1
    for fr in fracs:
        q = q * fr.denominator // math.gcd(q, fr.denominator)
    return np.array([int(fr * q) for fr in fracs], dtype=np.int64), q


def _eta_fraction(eta):
    return Fraction(float(eta)).limit_denominator(10**12)


def _upper_threshold(eta, n, q):
    # smallest integer s with s / (n q) >= eta
    e = _eta_fraction(eta)
    return math.ceil(e * n * q)


def _lower_threshold(eta, n, q):
    e = _eta_fraction(eta)
    return math.floor(e * n * q)


def _phi_state_values(chain, proj, phi):
    if proj is None:
        proj = Projection.identity(chain.labels)
    proj.check_compatible(chain)
    phi = phi if isinstance(phi, PhiFunction) else PhiFunction(phi)
    if phi.values.size != proj.n_points:
        raise SpecError("phi length does not match the state space")
    return proj, phi, phi.values[proj.map]


def _tail_counts(chain, proj, phi, eta, n_list, samples, seed, start, tail="upper"):
    """Hit counts for every horizon in ``n_list`` from one simulation pass."""
    proj, phi, vals = _phi_state_values(chain, proj, phi)
    n_list = sorted({check_positive_int(n, "n") for n in n_list})
    lat = _lattice(vals)
    horizon = n_list[-1]
    if lat is not None:
        weights = lat[0]
        if tail == "upper":
            cut = {n: _upper_threshold(eta, n, lat[1]) for n in n_list}
        else:
            cut = {n: _lower_threshold(eta, n, lat[1]) for n in n_list}
    else:
        # float fallback: ties within relative 1e-12 count as hits
        weights = vals
        slack = {n: 1e-12 * max(1.0, n) for n in n_list}
        cut = {n: eta * n - slack[n] if tail == "upper" else eta * n + slack[n] for n in n_list}
    hits = {n: 0 for n in n_list}
    for lo in range(0, samples, CHUNK):
        idx = np.arange(lo, min(lo + CHUNK, samples), dtype=np.uint64)
        acc = np.zeros(idx.size, dtype=weights.dtype)

        def visit(t, states, acc=acc):
            acc += weights[states]
            n = t + 1
            if n in hits:
                hit = acc >= cut[n] if tail == "upper" else acc <= cut[n]
                hits[n] += int(np.count_nonzero(hit))

        _run_paths(chain, seed, idx, horizon, start, visit)
    return hits


def empirical_tail(chain, proj, phi, cfg: SimConfig, tail="upper") -> TailEstimate:
    """Fraction of sampled paths with ``(1/n) sum_{i<n} phi(pi(s_i)) >= eta`` and its 99% CI."""
    hits = _tail_counts(chain, proj, phi, cfg.eta, [cfg.n], cfg.samples, cfg.seed, cfg.start, tail)
    return TailEstimate.from_counts(hits[cfg.n], cfg.samples)


# -- exact dynamic programming ------------------------------------------------------


def dp_feasible(chain, proj, phi, n):
    _, _, vals = _phi_state_values(chain, proj, phi)
    return n * chain.n_states <= DP_CELL_LIMIT and _lattice(vals) is not None


def occupation_distribution(chain, proj, phi, n, start="stationary"):
    """Exact law of ``sum_{i<n} q phi(pi(s_i))`` on the integer lattice.

    Returns ``(probs, q)`` with ``probs[s] = P(sum = s)``.
    """
    n = check_positive_int(n, "n")
    proj, phi, vals = _phi_state_values(chain, proj, phi)
    lat = _lattice(vals)
    if lat is None:
        raise InfeasibleError(
            f"phi values need a common denominator <= {LATTICE_MAX_DENOMINATOR} and at most {LATTICE_MAX_VALUES} distinct values"
        )
    if n * chain.n_states > DP_CELL_LIMIT:
        raise InfeasibleError(f"n * |states| = {n * chain.n_states} exceeds {DP_CELL_LIMIT}")
    a, q = lat
    S = chain.n_states
    width = n * int(a.max()) + 1
    f = np.zeros((S, width))
    if start == "stationary":
        m = _measure_of(chain)
        f[np.arange(S), a] = m
    else:
        f[int(start), a[int(start)]] = 1.0
    PT = chain.P.T
    for _ in range(n - 1):
        g = PT @ f
        f = np.zeros_like(g)
        for j in range(S):
            if a[j]:
                f[j, a[j]:] = g[j, : width - a[j]]
            else:
                f[j] = g[j]
    return f.sum(axis=0), q


def exact_tail_dp(chain, proj, phi, eta, n, tail="upper", start="stationary"):
    """Exact ``P(A_n >= eta)`` (upper) or ``P(A_n <= eta)`` (lower) by dynamic programming."""
    eta = check_unit_interval(eta, "eta")
    probs, q = occupation_distribution(chain, proj, phi, n, start)
    if tail == "upper":
        s = _upper_threshold(eta, n, q)
        return float(min(probs[s:].sum(), 1.0)) if s < probs.size else 0.0
    if tail == "lower":
        s = _lower_threshold(eta, n, q)
        return float(min(probs[: s + 1].sum(), 1.0)) if s >= 0 else 0.0
    raise SpecError(f"tail must be 'upper' or 'lower', got {tail!r}")


# -- comparison report ----------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    n: int
    p_hat: float
    ci_low: float
    ci_high: float
    exact_dp: Optional[float]
    bound: float
    k_used: Optional[int]
    rate: float
    chernoff_rate: float

    def cells(self):
        def fmt(x):
            return "" if x is None else repr(float(x))

        return [
            str(self.n),
            fmt(self.p_hat),
            fmt(self.ci_low),
            fmt(self.ci_high),
            fmt(self.exact_dp),
            fmt(self.bound),
            "" if self.k_used is None else str(self.k_used),
            fmt(self.rate),
            fmt(self.chernoff_rate),
        ]


def bound_vs_empirical(chain, proj, phi, eta, n_list, samples, seed, k_max=64, tail="upper", check_depth=10, lam=None):
    """One row per horizon: simulation, exact DP (when feasible), optimized bound and Chernoff rate.

    The property (M) certificate is checked first.  Horizons where no
    ``k`` is feasible get the trivial bound 1.  Raises
    :class:`BoundViolationError` if some row has ``ci_low > bound``.
    """
    if proj is None:
        proj = Projection.identity(chain.labels)
    proj, phi, _ = _phi_state_values(chain, proj, phi)
    cert = check_property_m(chain, proj, check_depth)
    if not cert.holds:
        n_bad, gap = cert.first_violation
        raise PropertyMError(
            f"property (M) fails at depth {n_bad} (gap {float(gap):.3e}); the bound does not apply",
            depth=n_bad,
            gap=float(gap),
        )
    op = averaging_operator(chain, proj)
    if lam is None:
        lam = l20_norm(op).lambda_
    lam = min(max(float(lam), 0.0), 1.0)
    m_phi = min(max(phi.mean(op.mX), 0.0), 1.0)
    n_list = sorted({check_positive_int(n, "n") for n in n_list})
    hits = _tail_counts(chain, proj, phi, eta, n_list, samples, seed, "stationary", tail)
    chernoff = kl_div(eta, m_phi)
    rows = []
    for n in n_list:
        est = TailEstimate.from_counts(hits[n], samples)
        exact = exact_tail_dp(chain, proj, phi, eta, n, tail) if dp_feasible(chain, proj, phi, n) else None
        try:
            rep = ld_tail_optimize(LDQuery(eta, m_phi, lam, n, tail), k_max=k_max)
            bound, k_used, rate = rep.bound, rep.k_used, rep.rate
        except InfeasibleError:
            bound, k_used, rate = 1.0, None, 0.0
        row = ComparisonRow(n, est.p_hat, est.ci_low, est.ci_high, exact, bound, k_used, rate, chernoff)
        if row.ci_low > row.bound:
            raise BoundViolationError(f"ci_low exceeds the bound: {dict(zip(CSV_HEADER, row.cells()))}", row=row)
        rows.append(row)
    return rows


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
