"""Certificate evaluators for effective equidistribution, entropy rigidity and non-escape of mass.

Every function takes explicit numeric parameters (divergences in nats) and
evaluates a displayed inequality.  Nothing here integrates over a space;
the shift-space inputs (``alpha``, ``h``) come from
:func:`spectral_ld.chain_model.collision_entropy_rate` and
:func:`spectral_ld.chain_model.entropy_rate`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from ._validation import check_positive_int, check_real, check_unit_interval
from .exceptions import InfeasibleError, SpecError
from .ld_bounds import kl_div


def _check_lambda_open(lam):
    lam = check_real(lam, "lambda")
    if not 0 < lam < 1:
        raise SpecError(f"lambda={lam!r} must lie in (0, 1); lambda = 0 and 1 are degenerate here")
    return lam


# -- effective equidistribution ---------------------------------------------------


@dataclass(frozen=True)
class EffectiveEquiParams:
    """Inputs of the two-clause effective equidistribution inequality.

    ``m_phiB0`` is ``m(phi^{B0})`` for clause ``a`` and ``m(phi_{B0})`` for
    clause ``b``.  With ``strict=False`` the threshold invariants are
    reported through ``EffectiveReport.feasible`` instead of raising, which
    allows evaluating limit cases on the boundary of the admissible region.
    """

    alpha: float
    h: float
    C_B0h: float
    lam: float
    n: int
    mu_phi: float
    m_phiB0: float
    mu_omega: float
    kappa: float
    k: int
    clause: str = "a"
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_real(self.alpha, "alpha"))
        h = check_real(self.h, "h")
        if h <= 0:
            raise SpecError("h must be positive")
        object.__setattr__(self, "h", h)
        c = check_real(self.C_B0h, "C_B0h")
        if c <= 0:
            raise SpecError("C_B0h must be positive")
        object.__setattr__(self, "C_B0h", c)
        object.__setattr__(self, "lam", _check_lambda_open(self.lam))
        object.__setattr__(self, "n", check_positive_int(self.n, "n"))
        object.__setattr__(self, "mu_phi", check_unit_interval(self.mu_phi, "mu_phi"))
        object.__setattr__(self, "m_phiB0", check_unit_interval(self.m_phiB0, "m_phiB0"))
        mu_omega = check_real(self.mu_omega, "mu_omega")
        if not 0 < mu_omega <= 1:
            raise SpecError("mu_omega must lie in (0, 1]")
        object.__setattr__(self, "mu_omega", mu_omega)
        object.__setattr__(self, "kappa", check_real(self.kappa, "kappa"))
        object.__setattr__(self, "k", check_positive_int(self.k, "k"))
        if self.clause not in ("a", "b"):
            raise SpecError(f"clause must be 'a' or 'b', got {self.clause!r}")

    @property
    def theta(self):
        return self.lam**self.k

    def violations(self):
        """Human-readable list of violated thresholds (empty when admissible)."""
        p = self
        out = []
        if not p.mu_omega > p.kappa:
            out.append(f"mu_omega={p.mu_omega!r} must exceed kappa={p.kappa!r}")
        if p.clause == "a":
            if p.m_phiB0 >= 1:
                out.append("m(phi^B0) must be below 1")
                return out
            k_min = (1 - p.mu_phi) / (1 - p.m_phiB0)
            if p.kappa < k_min:
                out.append(f"kappa={p.kappa!r} below (1 - mu_phi)/(1 - m_phiB0) = {k_min!r}")
            if p.kappa > 0:
                t = ((p.mu_phi - (1 - p.kappa)) / p.kappa - p.m_phiB0) / (1 - p.m_phiB0)
                if p.theta > t:
                    out.append(f"lambda^k = {p.theta!r} exceeds ([mu_phi - (1-kappa)]/kappa - m_phiB0)/(1 - m_phiB0) = {t!r}")
        else:
            if p.m_phiB0 <= 0:
                out.append("m(phi_B0) must be positive")
                return out
            k_min = p.mu_phi / p.m_phiB0
            if p.kappa < k_min:
                out.append(f"kappa={p.kappa!r} below mu_phi/m_phiB0 = {k_min!r}")
            if p.kappa > 0:
                t = (p.m_phiB0 - p.mu_phi / p.kappa) / p.m_phiB0
                if p.theta > t:
                    out.append(f"lambda^k = {p.theta!r} exceeds (m_phiB0 - mu_phi/kappa)/m_phiB0 = {t!r}")
        if p.kappa <= 0:
            out.append("kappa must be positive")
        return out


@dataclass(frozen=True)
class EffectiveReport:
    lhs: float
    rhs: float
    satisfied: bool
    feasible: bool
    theta: float
    clause: str

    def to_dict(self):
        return asdict(self)


def _clip01(x):
    return min(max(x, 0.0), 1.0)


def effective_inequality(params: EffectiveEquiParams) -> EffectiveReport:
    """Evaluate both sides of the effective equidistribution inequality.

    Clause ``a``::

        lhs = D([mu - (1-kappa)]/kappa || theta + (1-theta) m) / (-log theta)

    clause ``b``::

        lhs = D(mu/kappa || (1-theta) m) / (-log theta)

    and in both cases::

        rhs = (h - alpha)/(-log lambda)
              + (1/n) [log(log theta / log lambda) + D(mu || m)
                       - 2 log((mu_omega - kappa)/2) - log C]

    The ``log(log theta / log lambda)`` prefactor sits inside the ``1/n``
    bracket.
    """
    p = params
    problems = p.violations()
    if problems and p.strict:
        raise InfeasibleError("; ".join(problems))
    theta = p.theta
    log_theta = math.log(theta)
    log_lam = math.log(p.lam)
    if p.clause == "a":
        arg = (p.mu_phi - (1 - p.kappa)) / p.kappa
        target = theta + (1 - theta) * p.m_phiB0
    else:
        arg = p.mu_phi / p.kappa
        target = (1 - theta) * p.m_phiB0
    lhs = kl_div(_clip01(arg), _clip01(target)) / (-log_theta)
    gap = p.mu_omega - p.kappa
    log_gap = math.log(gap / 2) if gap > 0 else -math.inf
    bracket = math.log(log_theta / log_lam) + kl_div(p.mu_phi, p.m_phiB0) - 2 * log_gap - math.log(p.C_B0h)
    rhs = (p.h - p.alpha) / (-log_lam) + bracket / p.n
    return EffectiveReport(lhs, rhs, bool(lhs <= rhs), not problems, theta, p.clause)


# -- entropy deviation ----------------------------------------------------------


@dataclass(frozen=True)
class EntropyDeviationReport:
    lhs: Optional[float]
    rhs: float
    consistent: bool
    clause: Optional[str]
    lhs_undefined: bool
    theta: float

    def to_dict(self):
        return asdict(self)


def entropy_deviation_check(mu_phi, m_phi, lam, entropy_gap, k):
    """Compare the divergence of ``mu(phi)`` from the shifted target with the entropy gap.

    Clause ``a`` (``mu(phi) > m(phi)``) needs ``lambda^k < (mu - m)/(1 - m)``,
    clause ``b`` (``mu(phi) < m(phi)``) needs ``lambda^k < (m - mu)/m``.
    ``consistent`` is False when no ergodic measure with this entropy gap
    can have this value of ``mu(phi)``.
    """
    mu = check_unit_interval(mu_phi, "mu_phi")
    m = check_unit_interval(m_phi, "m_phi", open_left=True, open_right=True)
    lam = _check_lambda_open(lam)
    gap = check_real(entropy_gap, "entropy_gap")
    if not math.isfinite(gap) or gap < 0:
        raise SpecError("entropy_gap must be finite and nonnegative")
    k = check_positive_int(k, "k")
    theta = lam**k
    rhs = gap / (-math.log(lam))
    if mu == m:
        return EntropyDeviationReport(None, rhs, True, None, True, theta)
    if mu > m:
        clause = "a"
        t = (mu - m) / (1 - m)
        target = theta + (1 - theta) * m
    else:
        clause = "b"
        t = (m - mu) / m
        target = (1 - theta) * m
    if not theta < t:
        raise InfeasibleError(f"clause {clause}: lambda^k = {theta!r} is not below the threshold {t!r}")
    lhs = kl_div(mu, target) / (-math.log(theta))
    return EntropyDeviationReport(lhs, rhs, bool(lhs <= rhs), clause, False, theta)


# -- rigidity -----------------------------------------------------------------------


@dataclass(frozen=True)
class RigidityQuery:
    """``entropy_gap`` is ``D = h_m(a) - h_mu(a)``; ``h_m`` is needed only for ``C_eps``."""

    lam: float
    entropy_gap: float
    k_max: int = 60
    epsilon: Optional[float] = None
    h_m: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "lam", _check_lambda_open(self.lam))
        gap = check_real(self.entropy_gap, "entropy_gap")
        if not math.isfinite(gap) or gap < 0:
            raise SpecError("entropy_gap must be finite and nonnegative")
        object.__setattr__(self, "entropy_gap", gap)
        object.__setattr__(self, "k_max", check_positive_int(self.k_max, "k_max"))
        if self.epsilon is not None:
            eps = check_real(self.epsilon, "epsilon")
            if eps <= 0:
                raise SpecError("epsilon must be positive")
            object.__setattr__(self, "epsilon", eps)
            if self.h_m is None:
                raise SpecError("epsilon requires h_m (C_eps depends on h_m)")
        if self.h_m is not None:
            h_m = check_real(self.h_m, "h_m")
            if h_m <= 0 or h_m < gap:
                raise SpecError("h_m must be positive and at least entropy_gap")
            object.__setattr__(self, "h_m", h_m)


@dataclass(frozen=True)
class RigidityReport:
    bound: float
    theta_used: float
    branch: str
    grid_bound: float
    grid_k: int
    corollary_bound: Optional[float]
    corollary_theta: Optional[float]
    C_eps: Optional[float] = None
    eps_bound: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def pinsker_value(lam, D, theta):
    """``sqrt(D / (-2 log lambda)) sqrt(-log theta) + theta``."""
    return math.sqrt(D / (-2 * math.log(lam))) * math.sqrt(-math.log(theta)) + theta


def corollary_theta(lam, D):
    """``theta = lambda`` if ``sqrt(D) > lambda``, else ``lambda^{k+1}`` with ``lambda^{k+1} <= sqrt(D) <= lambda^k``.

    Returns None for ``D = 0`` where no such ``k`` exists.
    """
    s = math.sqrt(D)
    if s > lam:
        return lam
    if s == 0:
        return None
    k = max(1, math.floor(math.log(s) / math.log(lam)))
    while lam ** (k + 1) > s:
        k += 1
    while k > 1 and lam**k < s:
        k -= 1
    return lam ** (k + 1)


def c_eps_prime(epsilon, h_m):
    """``sup_{0 < r <= sqrt(h_m)} (-log r) r^eps``.

    The maximizer of ``(-log r) r^eps`` on ``(0, 1)`` is ``r = e^{-1/eps}``
    with value ``1/(e eps)``; when ``sqrt(h_m)`` is smaller the supremum
    sits at the endpoint.
    """
    r_star = math.exp(-1.0 / epsilon)
    r_max = math.sqrt(h_m)
    if r_star <= r_max:
        return 1.0 / (math.e * epsilon)
    return -math.log(r_max) * r_max**epsilon


def c_eps(epsilon, h_m):
    return max(math.sqrt(c_eps_prime(epsilon, h_m)) / 2.0, 1.0)


def rigidity_bound(q: RigidityQuery) -> RigidityReport:
    """Bound on ``|mu(phi) - m(phi)|`` from the entropy gap.

    Minimizes the Pinsker form over ``theta = lambda^k, k <= k_max`` and
    compares with the explicit selection rule; returns the smaller value
    (ties go to the selection rule).
    """
    lam, D = q.lam, q.entropy_gap
    grid = [(pinsker_value(lam, D, lam**k), k) for k in range(1, q.k_max + 1)]
    grid_bound, grid_k = min(grid, key=lambda t: (t[0], t[1]))
    th = corollary_theta(lam, D)
    cor_bound = pinsker_value(lam, D, th) if th is not None else None
    if cor_bound is not None and cor_bound <= grid_bound:
        bound, theta_used, branch = cor_bound, th, "corollary_rule"
    else:
        bound, theta_used, branch = grid_bound, lam**grid_k, "pinsker_grid"
    ce = eb = None
    if q.epsilon is not None:
        ce = c_eps(q.epsilon, q.h_m)
        eb = ce * D ** (0.5 - q.epsilon) * ((-math.log(lam)) ** -0.5 + 2)
    return RigidityReport(bound, theta_used, branch, grid_bound, grid_k, cor_bound, th, ce, eb)


def sqrt_log_bound(lam, D):
    """``sqrt(D log D / (4 log lambda) + D/2) + sqrt(D)``, the explicit bound for ``sqrt(D) <= lambda``."""
    return math.sqrt(D * math.log(D) / (4 * math.log(lam)) + D / 2) + math.sqrt(D)


# -- mass bounds --------------------------------------------------------------------


def bigset_mass_bound(lam, k, m_F, entropy_gap):
    """Upper bound on ``1 - mu(F)`` for a closed set ``F`` of Haar mass ``m_F``.

    ``[log theta / log(theta + (1-theta)(1-m_F))] [gap/(-log lambda) + 1/(-log theta)]
    + theta + (1-theta)(1-m_F)`` with ``theta = lambda^k``.
    """
    lam = _check_lambda_open(lam)
    k = check_positive_int(k, "k")
    m_F = check_unit_interval(m_F, "m_F", open_left=True, open_right=True)
    gap = check_real(entropy_gap, "entropy_gap")
    if gap < 0:
        raise SpecError("entropy_gap must be nonnegative")
    theta = lam**k
    miss = theta + (1 - theta) * (1 - m_F)
    ratio = math.log(theta) / math.log(miss)
    return ratio * (gap / (-math.log(lam)) + 1.0 / (-math.log(theta))) + miss


def nonescape_from_lambda(h_m, h, lam):
    """Lower bound ``max(0, 1 - (h_m - h)/(-log lambda))`` on the retained mass."""
    h_m = check_real(h_m, "h_m")
    h = check_real(h, "h")
    if h > h_m:
        raise SpecError(f"h={h!r} exceeds h_m={h_m!r}")
    lam = _check_lambda_open(lam)
    return max(0.0, 1.0 - (h_m - h) / (-math.log(lam)))
