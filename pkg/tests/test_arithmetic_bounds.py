import itertools
import math

import numpy as np
import pytest

from spectral_ld.arithmetic_bounds import (
    SlnElement,
    entropy_sln,
    eta_exponent,
    eta_log,
    nonescape_sln,
    root_sum,
)
from spectral_ld.exceptions import SpecError


def pairwise_root_sum(e):
    return sum(a - b for a, b in itertools.combinations(e, 2))


def random_element(rng, n):
    while True:
        e = rng.integers(-6, 7, n - 1)
        e = np.append(e, -e.sum())
        e = tuple(int(x) for x in sorted(e, reverse=True))
        if abs(e[0]) <= 50:
            return SlnElement(3, e)


def test_sl2_eta():
    a = SlnElement(5, (1, -1))
    assert eta_exponent(a) == 2
    assert abs(eta_log(a) - 2 * math.log(5)) < 1e-15


def test_sl4_eta_even_case():
    # n = 2k with k = 2 gives exponent 2k^2 = 8
    assert eta_exponent(SlnElement(7, (3, 1, -1, -3))) == 8


def test_sl3_eta_odd_case():
    # n = 2k + 1 with k = 1 gives exponent 2k(k+1) = 4
    assert eta_exponent(SlnElement(2, (2, 0, -2))) == 4


def test_entropy_values():
    assert abs(entropy_sln(SlnElement(5, (1, -1))) - 2 * math.log(5)) < 1e-15
    a = SlnElement(5, (3, 1, -1, -3))
    assert root_sum(a) == 20
    assert abs(entropy_sln(a) - 20 * math.log(5)) < 1e-13
    assert entropy_sln(SlnElement(3, (0, 0, 0))) == 0.0


def test_nonescape_full_entropy():
    assert nonescape_sln(SlnElement(3, (2, 0, -2)), entropy_defect=0.0).bound == 1.0
    a = SlnElement(3, (2, 0, -2))
    assert nonescape_sln(a, h=entropy_sln(a)).bound == 1.0


def test_nonescape_higher_rank_example():
    a = SlnElement(5, (3, 1, -1, -3))
    rep = nonescape_sln(a, entropy_defect=math.log(5), rank_one=False)
    assert rep.bound == 0.75 and rep.r == 1


def test_nonescape_rank_one_threshold():
    a = SlnElement(11, (1, -1))
    rep = nonescape_sln(a, entropy_defect=0.25 * 2 * math.log(11), rank_one=True)
    assert rep.r == 2 and rep.bound == 0.0


def test_nonescape_epsilon_variant():
    a = SlnElement(5, (3, 1, -1, -3))
    L = math.log(5)
    r0 = nonescape_sln(a, entropy_defect=L, epsilon=0.0)
    assert r0.bound_epsilon == r0.bound
    r1 = nonescape_sln(a, entropy_defect=L, epsilon=0.1)
    assert abs(r1.bound_epsilon - (1 - L / ((0.4 / 1) * 8 * L))) < 1e-15
    assert r1.bound_epsilon < r1.bound


def test_nonescape_errors():
    with pytest.raises(SpecError, match="regular"):
        nonescape_sln(SlnElement(3, (0, 0)), entropy_defect=0.0)
    with pytest.raises(SpecError, match="regular"):
        nonescape_sln(SlnElement(3, (1, 0, 0, -1)), entropy_defect=0.0)
    with pytest.raises(SpecError):
        nonescape_sln(SlnElement(3, (1, -1)), h=10.0)
    with pytest.raises(SpecError):
        nonescape_sln(SlnElement(3, (1, -1)))


@pytest.mark.parametrize(
    "p,e",
    [(4, (1, -1)), (3, (1, 0)), (3, (-1, 1)), (3, (1,)), (3, (1.5, -1.5))],
)
def test_element_validation(p, e):
    with pytest.raises(SpecError):
        SlnElement(p, e)


def test_parse():
    a = SlnElement.parse("3,1,-1,-3", 5)
    assert a.exponents == (3, 1, -1, -3) and a.regular and a.n == 4
    with pytest.raises(SpecError):
        SlnElement.parse("3,x", 5)


def test_randomized_invariants():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        a = random_element(rng, int(rng.integers(2, 9)))
        assert root_sum(a) == pairwise_root_sum(a.exponents)
        assert eta_exponent(a) >= 0
        assert eta_log(a) <= entropy_sln(a) + 1e-12
        doubled = SlnElement(a.p, tuple(2 * x for x in a.exponents))
        assert eta_exponent(doubled) == 2 * eta_exponent(a)
        assert root_sum(doubled) == 2 * root_sum(a)
        inverse = SlnElement(a.p, tuple(-x for x in reversed(a.exponents)))
        assert entropy_sln(inverse) == entropy_sln(a)


def test_nonescape_monotone_in_gap():
    a = SlnElement(3, (4, 1, -2, -3))
    vals = [nonescape_sln(a, entropy_defect=g).bound for g in np.linspace(0, 3, 30)]
    assert vals[0] == 1.0
    assert all(b <= a_ for a_, b in zip(vals, vals[1:]))
