"""Closed forms for diagonal elements of ``SL_n(Q_p)``.

For ``a = diag(p^{e_1}, ..., p^{e_n})`` with ``e`` nonincreasing and summing to
zero, ``-log eta(a) = log p * sum_{i <= n/2} (e_i - e_{n+1-i})`` and the Haar
entropy is the positive root sum ``log p * sum_{i<j} (e_i - e_j)``.

``eta`` is normalized so that ``eta(a) <= 1``; only ``-log eta >= 0`` is
exposed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from ._validation import check_positive_int, check_real
from .exceptions import SpecError


def _is_prime(p):
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class SlnElement:
    p: int
    exponents: tuple

    def __post_init__(self):
        p = check_positive_int(self.p, "p")
        if not _is_prime(p):
            raise SpecError(f"p={p} is not prime")
        object.__setattr__(self, "p", p)
        try:
            e = tuple(int(x) for x in self.exponents)
        except (TypeError, ValueError):
            raise SpecError("exponents must be integers") from None
        if any(float(x) != y for x, y in zip(self.exponents, e)):
            raise SpecError("exponents must be integers")
        if len(e) < 2:
            raise SpecError("need n >= 2 exponents")
        if sum(e) != 0:
            raise SpecError(f"exponents sum to {sum(e)}, not 0")
        if any(e[i] < e[i + 1] for i in range(len(e) - 1)):
            raise SpecError("exponents must be nonincreasing")
        object.__setattr__(self, "exponents", e)

    @property
    def n(self):
        return len(self.exponents)

    @property
    def regular(self):
        return len(set(self.exponents)) == self.n

    @classmethod
    def parse(cls, text, p):
        """From a comma-separated exponent string such as ``"3,1,-1,-3"``."""
        try:
            e = tuple(int(x) for x in str(text).split(","))
        except ValueError:
            raise SpecError(f"cannot parse exponents {text!r}") from None
        return cls(p, e)


def eta_exponent(a: SlnElement):
    """``-log_p eta(a)`` as an integer."""
    e = a.exponents
    return sum(e[i] - e[a.n - 1 - i] for i in range(a.n // 2))


def root_sum(a: SlnElement):
    """``sum_{i<j} (e_i - e_j)`` as an integer."""
    e = a.exponents
    n = a.n
    # each e_i appears with sign + (n-1-i) times and - i times
    return sum((n - 1 - 2 * i) * e[i] for i in range(n))


def eta_log(a: SlnElement):
    return eta_exponent(a) * math.log(a.p)


def entropy_sln(a: SlnElement):
    return root_sum(a) * math.log(a.p)


@dataclass(frozen=True)
class NonEscapeReport:
    bound: float
    bound_epsilon: float
    r: int
    epsilon: float
    gap: float
    eta_log: float

    def to_dict(self):
        return asdict(self)


def nonescape_sln(a: SlnElement, h=None, rank_one=False, epsilon=0.0, entropy_defect=None):
    """Mass lower bound ``max(0, 1 - 2r (h_m - h)/(-log eta))``, ``r = 2`` in rank one else 1.

    ``bound_epsilon`` is the variant ``1 - (h_m - h)/[((1/2 - eps)/r)(-log eta)]``
    coming from the decay rate ``eta^{(1/2 - eps)/r}``; it equals ``bound``
    at ``eps = 0``.  Pass either the entropy ``h`` or the defect
    ``h_m - h`` in nats as ``entropy_defect``.
    """
    if (h is None) == (entropy_defect is None):
        raise SpecError("give exactly one of h and entropy_defect")
    epsilon = check_real(epsilon, "epsilon")
    if not 0 <= epsilon < 0.5:
        raise SpecError("epsilon must lie in [0, 1/2)")
    if not a.regular:
        raise SpecError(f"exponents {a.exponents} are not regular (repeated entries)")
    el = eta_log(a)
    if el == 0:
        raise SpecError("-log eta(a) = 0: a is central")
    h_m = entropy_sln(a)
    if entropy_defect is not None:
        gap = check_real(entropy_defect, "entropy_defect")
        if gap < 0 or gap > h_m:
            raise SpecError(f"entropy_defect={gap!r} must lie in [0, h_m(a)={h_m!r}]")
    else:
        h = check_real(h, "h")
        if h > h_m:
            raise SpecError(f"h={h!r} exceeds h_m(a)={h_m!r}")
        gap = h_m - h
    r = 2 if rank_one else 1
    bound = max(0.0, 1.0 - 2 * r * gap / el)
    bound_eps = max(0.0, 1.0 - gap / (((0.5 - epsilon) / r) * el))
    return NonEscapeReport(bound, bound_eps, r, epsilon, gap, el)
