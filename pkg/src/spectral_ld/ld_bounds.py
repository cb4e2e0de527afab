"""Large-deviation bounds for occupation averages driven by an ``L^2_0`` norm.

Bounds are parameterized by an integer exponentiation level ``k`` with
``theta = lambda**k``; ``lambda = 0`` is therefore handled exactly and
``theta`` always lies in ``{lambda**k : k >= 1}``.

All divergences are in nats.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ._validation import check_positive_int, check_real, check_unit_interval
from .chain_model import PhiFunction, Projection, _measure_of, averaging_operator, check_property_m
from .exceptions import InfeasibleError, PropertyMError, SpecError

UPPER = "upper"
LOWER = "lower"


def kl_div(a, b):
    """Binary Kullback-Leibler divergence ``D(a || b)`` in nats.

    Uses ``0 log 0 = 0``; returns ``inf`` when ``a > 0, b = 0`` or
    ``a < 1, b = 1``.

    >>> round(kl_div(0.5, 0.25), 6)
    0.143841
    """
    a = check_unit_interval(a, "a")
    b = check_unit_interval(b, "b")
    if a == b:
        return 0.0
    total = 0.0
    if a > 0:
        if b == 0:
            return math.inf
        total += a * math.log(a / b)
    if a < 1:
        if b == 1:
            return math.inf
        total += (1 - a) * math.log((1 - a) / (1 - b))
    return max(total, 0.0)


def optimal_tilt(eta, beta):
    """Maximizer ``r*`` of ``r eta - log(1 + beta (e^r - 1))`` for ``beta < eta``."""
    eta = check_real(eta, "eta")
    beta = check_real(beta, "beta")
    if not (0 < beta < 1 and 0 < eta < 1):
        raise SpecError("optimal_tilt needs 0 < beta, eta < 1")
    if eta <= beta:
        raise SpecError(f"eta={eta} <= beta={beta}: no positive tilt")
    return math.log(eta / beta) + math.log1p(-beta) - math.log1p(-eta)


def tilted_norm_bound(r, m_phi, lam):
    """Upper bound ``1 + beta (e^r - 1)``, ``beta = lam + (1 - lam) m_phi``, on the tilted norm."""
    r = check_real(r, "r")
    if r < 0:
        raise SpecError("tilt r must be nonnegative")
    m_phi = check_unit_interval(m_phi, "m_phi")
    lam = check_unit_interval(lam, "lambda")
    beta = lam + (1 - lam) * m_phi
    return 1.0 + beta * math.expm1(r)


def legendre_value(r, eta, beta):
    """``r eta - log(1 + beta (e^r - 1))``; maximized over r this is ``D(eta || beta)``."""
    return r * eta - math.log1p(beta * math.expm1(r))


# -- exact moment generating function ---------------------------------------------


def _phi_on_states(phi, proj, n_states):
    vals = np.asarray(getattr(phi, "values", phi), dtype=float)
    if proj is None:
        if vals.size != n_states:
            raise SpecError("phi length does not match the chain")
        return vals
    if vals.size != proj.n_points:
        raise SpecError("phi length does not match the state space")
    return vals[proj.map]


def exact_mgf(chain, proj, phi, r, n, check_depth=None):
    """``E_m exp(r * sum_{i<n} phi(pi(s_i)))`` computed two ways.

    (i) transfer-matrix product on the chain, (ii) the compressed inner
    product ``<e^{r phi/2}, (M T M)^{n-1} e^{r phi/2}>`` on ``X``.  The two
    agree under property (M); the function refuses otherwise.
    """
    n = check_positive_int(n, "n")
    r = check_real(r, "r")
    if proj is None:
        proj = Projection.identity(chain.labels)
    phi = phi if isinstance(phi, PhiFunction) else PhiFunction(phi)
    depth = n if check_depth is None else check_depth
    if depth >= 2:
        cert = check_property_m(chain, proj, depth)
        if not cert.holds:
            n_bad, gap = cert.first_violation
            raise PropertyMError(
                f"property (M) fails at depth {n_bad} (gap {float(gap):.3e}); "
                "the compressed moment identity does not apply",
                depth=n_bad,
                gap=float(gap),
            )
    m = _measure_of(chain)
    w = np.exp(r * _phi_on_states(phi, proj, chain.n_states))

    # (i) sum over paths: m^T E (P E)^{n-1} 1
    v = m * w
    for _ in range(n - 1):
        v = (v @ chain.P) * w
    path_value = float(v.sum())

    # (ii) compressed inner product on X
    op = averaging_operator(chain, proj)
    h = np.exp(0.5 * r * phi.values)
    x = h.copy()
    for _ in range(n - 1):
        x = h * (op.T @ (h * x))
    compressed_value = float(np.dot(op.mX * h, x))

    scale = max(abs(path_value), abs(compressed_value), 1e-300)
    if abs(path_value - compressed_value) > 1e-10 * scale:
        raise PropertyMError(
            f"moment identity mismatch: {path_value!r} vs {compressed_value!r}", depth=n
        )
    return path_value


def mgf_norm_bound(r, m_phi, lam, n):
    """``(1 + m(phi)(e^r-1)) (1 + beta (e^r-1))^{n-1}``: the moment bound from the tilted norm."""
    return (1.0 + m_phi * math.expm1(r)) * tilted_norm_bound(r, m_phi, lam) ** (n - 1)


# -- tail bounds ----------------------------------------------------------------


@dataclass(frozen=True)
class LDQuery:
    eta: float
    m_phi: float
    lam: float
    n: int
    tail: str = UPPER
    k: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "eta", check_unit_interval(self.eta, "eta"))
        object.__setattr__(self, "m_phi", check_unit_interval(self.m_phi, "m_phi"))
        object.__setattr__(self, "lam", check_unit_interval(self.lam, "lambda"))
        object.__setattr__(self, "n", check_positive_int(self.n, "n"))
        if self.tail not in (UPPER, LOWER):
            raise SpecError(f"tail must be 'upper' or 'lower', got {self.tail!r}")
        if self.tail == UPPER and self.eta < self.m_phi:
            raise SpecError("upper tail requires eta >= m_phi")
        if self.tail == LOWER and self.eta > self.m_phi:
            raise SpecError("lower tail requires eta <= m_phi")
        if self.k is not None:
            object.__setattr__(self, "k", check_positive_int(self.k, "k"))

    def with_k(self, k):
        return LDQuery(self.eta, self.m_phi, self.lam, self.n, self.tail, k)

    def to_dict(self):
        return {"eta": self.eta, "m_phi": self.m_phi, "lambda": self.lam, "n": self.n, "tail": self.tail, "k": self.k}


@dataclass(frozen=True)
class LDReport:
    bound: float
    rate: float
    k_used: int
    theta: float
    prefactor: float
    clause: str
    vacuous: bool
    bound_simplified: float
    tighter: str

    def to_dict(self):
        return asdict(self)


def _theta(lam, k):
    return 0.0 if lam == 0.0 else lam**k


def feasibility_threshold(q: LDQuery):
    """Largest admissible ``theta`` for the query's clause."""
    if q.tail == UPPER:
        return 1.0 if q.m_phi == 1 else (q.eta - q.m_phi) / (1 - q.m_phi)
    return 1.0 if q.m_phi == 0 else (q.m_phi - q.eta) / q.m_phi


def minimal_feasible_k(q: LDQuery):
    """Smallest ``k >= 1`` with ``lambda**k`` below the threshold, or None if none exists."""
    t = feasibility_threshold(q)
    if q.lam == 0.0:
        return 1 if t >= 0 else None
    if t <= 0:
        return None
    if q.lam == 1.0:
        return 1 if t >= 1 else None
    k = max(1, math.ceil(math.log(t) / math.log(q.lam)))
    # guard against rounding at the boundary
    while k > 1 and _theta(q.lam, k - 1) <= t:
        k -= 1
    while _theta(q.lam, k) > t:
        k += 1
    return k


def ld_tail_bound(q: LDQuery) -> LDReport:
    """Tail bound at a fixed exponentiation level ``k``.

    ``k exp[-n (1/k - 1/n) D(eta || target)]`` with target
    ``theta + (1 - theta) m(phi)`` for the upper tail and
    ``(1 - theta) m(phi)`` for the lower tail.
    """
    if q.k is None:
        raise SpecError("ld_tail_bound needs k; use ld_tail_optimize to scan k")
    k = q.k
    theta = _theta(q.lam, k)
    t = feasibility_threshold(q)
    if theta > t:
        which = "(eta - m_phi)/(1 - m_phi)" if q.tail == UPPER else "(m_phi - eta)/m_phi"
        raise InfeasibleError(f"k={k}: lambda^k = {theta!r} exceeds {which} = {t!r}")
    if q.tail == UPPER:
        target = theta + (1 - theta) * q.m_phi
        clause = "a"
    else:
        target = (1 - theta) * q.m_phi
        clause = "b"
    d = kl_div(q.eta, min(max(target, 0.0), 1.0))
    rate = d / k
    if math.isinf(d):
        bound = 0.0
        prefactor = math.inf
    else:
        prefactor = k * math.exp(d)
        bound = k * math.exp(-q.n * (1.0 / k - 1.0 / q.n) * d)
    d_ref = kl_div(q.eta, q.m_phi)
    if math.isinf(d_ref) or math.isinf(d):
        simplified = bound
    else:
        simplified = k * math.exp(d_ref) * math.exp(-q.n * rate)
    # the two forms coincide when theta = 0; treat rounding-level differences as a tie
    tighter = "split" if bound <= simplified * (1 + 1e-12) else "simplified"
    if clause == "a" and k == 1:
        clause = "ld_simple"
    return LDReport(
        bound=bound,
        rate=rate,
        k_used=k,
        theta=theta,
        prefactor=prefactor,
        clause=clause,
        vacuous=bound >= 1.0,
        bound_simplified=simplified,
        tighter=tighter,
    )


def ld_tail_optimize(q: LDQuery, k_max=64) -> LDReport:
    """Minimum of :func:`ld_tail_bound` over feasible ``k <= k_max``; ties go to the smaller ``k``."""
    k_max = check_positive_int(k_max, "k_max")
    k0 = minimal_feasible_k(q)
    if k0 is None:
        raise InfeasibleError(
            f"no k makes lambda^k <= {feasibility_threshold(q)!r} (lambda={q.lam!r}, eta={q.eta!r}, m_phi={q.m_phi!r})"
        )
    if k0 > k_max:
        raise InfeasibleError(f"minimal feasible k is {k0} > k_max={k_max}")
    best = None
    for k in range(k0, k_max + 1):
        rep = ld_tail_bound(q.with_k(k))
        if best is None or rep.bound < best.bound:
            best = rep
    return best
