import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_ld.chain_model import (
    ChainSpec,
    PhiFunction,
    Projection,
    averaging_operator,
    chain_from_dict,
    chain_to_dict,
    check_property_m,
    collision_entropy_rate,
    communicating_classes,
    entropy_rate,
    exact_stationary,
    load_chain,
    n_step_operator,
    permute_chain,
    stationary_measure,
)
from spectral_ld.exceptions import ReducibleChainError, SpecError
from spectral_ld.graph_walks import complete_graph, nonbacktracking_chain, petersen_graph

from conftest import random_chain
from oracles import collision_by_words, stationary_by_eig


def binary_entropy(p):
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


# -- ChainSpec validation ---------------------------------------------------------


def test_row_sum_violation_rejected():
    with pytest.raises(SpecError, match="row 0"):
        ChainSpec.from_matrix([[0.5, 0.6], [0.5, 0.5]])


def test_negative_entry_rejected():
    with pytest.raises(SpecError):
        ChainSpec.from_matrix([[1.2, -0.2], [0.5, 0.5]])


def test_non_stationary_measure_rejected():
    with pytest.raises(SpecError):
        ChainSpec.from_matrix([[0.9, 0.1], [0.2, 0.8]], m=[0.5, 0.5])


def test_arrays_are_read_only(two_state):
    with pytest.raises(ValueError):
        two_state.P[0, 0] = 0.0


def test_projection_must_be_surjective():
    with pytest.raises(SpecError):
        Projection(np.array([0, 0, 2]), ("a", "b", "c"))


def test_phi_values_in_unit_interval():
    with pytest.raises(SpecError):
        PhiFunction([0.2, 1.5])


# -- stationary measure -----------------------------------------------------------


def test_stationary_two_state():
    m = stationary_measure(ChainSpec.from_matrix([[0.9, 0.1], [0.2, 0.8]]))
    assert np.allclose(m, [2 / 3, 1 / 3], atol=1e-15)


def test_stationary_identity_is_reducible():
    with pytest.raises(ReducibleChainError) as exc:
        stationary_measure(ChainSpec.from_matrix(np.eye(2)))
    assert len(exc.value.classes) == 2


def test_stationary_iid_rows():
    m = stationary_measure(ChainSpec.from_matrix([[0.25, 0.75], [0.25, 0.75]]))
    assert np.allclose(m, [0.25, 0.75], atol=1e-15)


def test_stationary_matches_eigenvector_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        c = random_chain(rng, int(rng.integers(2, 12)))
        assert np.allclose(stationary_measure(c), stationary_by_eig(c.P), atol=1e-12)


def test_stationary_power_iteration_path():
    # above the dense-solve limit the lazy power iteration is used
    rng = np.random.default_rng(0)
    n = 2100
    P = np.zeros((n, n))
    idx = np.arange(n)
    P[idx, (idx + 1) % n] = 0.5
    P[idx, rng.integers(0, n, n)] += 0.5
    m = stationary_measure(ChainSpec.from_matrix(P))
    assert np.max(np.abs(m @ P - m)) < 1e-12
    assert abs(m.sum() - 1) < 1e-12


def test_transient_states_get_zero_mass():
    P = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.0, 0.5, 0.5]]
    m = stationary_measure(ChainSpec.from_matrix(P))
    assert m[0] == 0.0
    assert np.allclose(m[1:], [0.5, 0.5])


def test_communicating_classes_closed_flags():
    classes, closed = communicating_classes(np.array([[0.5, 0.5], [0.0, 1.0]]))
    by_members = {tuple(c): cl for c, cl in zip(classes, closed)}
    assert by_members[(0,)] is False and by_members[(1,)] is True


def test_exact_stationary_gth():
    m = exact_stationary(np.array([[Fraction(9, 10), Fraction(1, 10)], [Fraction(1, 5), Fraction(4, 5)]], dtype=object))
    assert list(m) == [Fraction(2, 3), Fraction(1, 3)]


# -- averaging operator -----------------------------------------------------------


def test_identity_projection_gives_P(two_state):
    op = averaging_operator(two_state)
    assert np.allclose(op.T, two_state.P, atol=1e-15)


def test_collapse_projection_gives_one(two_state):
    op = averaging_operator(two_state, Projection.collapse(2))
    assert op.T.shape == (1, 1) and abs(op.T[0, 0] - 1) < 1e-15


def test_k3_terminal_projection_matrix():
    nb = nonbacktracking_chain(complete_graph(3))
    op = averaging_operator(nb.chain, nb.terminal)
    expected = np.full((3, 3), 0.5)
    np.fill_diagonal(expected, 0.0)
    assert np.array_equal(op.T, expected)


def test_null_atom_is_error():
    P = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.0, 0.5, 0.5]]
    chain = ChainSpec.from_matrix(P).with_stationary()
    with pytest.raises(SpecError, match="zero mass"):
        averaging_operator(chain)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 8), k=st.integers(1, 4))
def test_averaging_operator_invariants(seed, n, k):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, n)
    k = min(k, n)
    pmap = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
    rng.shuffle(pmap)
    proj = Projection(pmap, tuple(str(i) for i in range(k)))
    op = averaging_operator(chain, proj)
    assert np.max(np.abs(op.T.sum(axis=1) - 1)) <= 1e-12
    assert np.max(np.abs(op.mX @ op.T - op.mX)) <= 1e-12


# -- n-step operator and property (M) ---------------------------------------------


def test_n_step_zero_is_identity(two_state):
    assert np.array_equal(n_step_operator(two_state, None, 0), np.eye(2))


def test_n_step_one_is_averaging(two_state):
    assert np.allclose(n_step_operator(two_state, None, 1), averaging_operator(two_state).T, atol=1e-15)


def test_n_step_identity_projection_is_power(two_state):
    assert np.allclose(n_step_operator(two_state, None, 2), two_state.P @ two_state.P, atol=1e-15)


def test_n_step_overflow_guard(two_state):
    with pytest.raises(SpecError):
        n_step_operator(two_state, None, 10**6 + 1)


def test_k3_two_step_diagonal_zero():
    nb = nonbacktracking_chain(complete_graph(3))
    T2 = n_step_operator(nb.chain, nb.terminal, 2)
    assert np.all(np.diag(T2) == 0)


def test_property_m_identity_holds(two_state):
    cert = check_property_m(two_state, None, 10)
    assert cert.holds and cert.holds_up_to == 10 and cert.first_violation is None


def test_property_m_k3_vertex_projection():
    nb = nonbacktracking_chain(complete_graph(3))
    cert = check_property_m(nb.chain, nb.terminal, 5, exact=True)
    assert cert.first_violation == (2, Fraction(1, 2))
    assert cert.holds_up_to == 1


def test_property_m_petersen_edges_exact():
    nb = nonbacktracking_chain(petersen_graph())
    cert = check_property_m(nb.chain, nb.projection("identity"), 10, exact=True)
    assert cert.holds and cert.exact


def test_property_m_needs_depth_two(two_state):
    with pytest.raises(SpecError):
        check_property_m(two_state, None, 1)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 7))
def test_markov_identity_projection_holds_to_20(seed, n):
    chain = random_chain(np.random.default_rng(seed), n)
    cert = check_property_m(chain, None, 20)
    assert cert.holds


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 6))
def test_n_step_equals_power_iff_certificate(seed, n):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng, n)
    pmap = np.array([0, 1] + list(rng.integers(0, 2, n - 2)))
    proj = Projection(pmap, ("a", "b"))
    cert = check_property_m(chain, proj, 6)
    T1 = n_step_operator(chain, proj, 1)
    gaps = [np.max(np.abs(n_step_operator(chain, proj, k) - np.linalg.matrix_power(T1, k))) for k in range(2, 7)]
    assert cert.holds == all(g <= 1e-10 for g in gaps)


def test_exact_and_float_certificates_agree():
    nb = nonbacktracking_chain(petersen_graph())
    f = check_property_m(nb.chain, nb.terminal, 4)
    e = check_property_m(nb.chain, nb.terminal, 4, exact=True)
    assert f.first_violation[0] == e.first_violation[0] == 2
    assert abs(f.first_violation[1] - float(e.first_violation[1])) < 1e-12


def test_certificate_to_dict_records_exact_gap():
    nb = nonbacktracking_chain(complete_graph(3))
    d = check_property_m(nb.chain, nb.terminal, 3, exact=True).to_dict()
    assert d["first_violation"] == {"n": 2, "gap": 0.5, "gap_exact": "1/2"}


# -- entropy --------------------------------------------------------------------


def test_entropy_uniform_iid():
    c = ChainSpec.from_matrix(np.full((4, 4), 0.25))
    assert abs(entropy_rate(c) - math.log(4)) < 1e-15


def test_entropy_permutation_is_zero():
    c = ChainSpec.from_matrix(np.roll(np.eye(3), 1, axis=1))
    assert entropy_rate(c) == 0.0


def test_entropy_two_state(two_state):
    expected = (2 / 3) * binary_entropy(0.1) + (1 / 3) * binary_entropy(0.2)
    assert abs(entropy_rate(two_state) - expected) < 1e-15


def test_entropy_permutation_invariant():
    rng = np.random.default_rng(11)
    for _ in range(10):
        c = random_chain(rng, 6)
        perm = rng.permutation(6)
        assert abs(entropy_rate(c) - entropy_rate(permute_chain(c, perm))) < 1e-13


def test_collision_uniform():
    c = ChainSpec.from_matrix(np.full((3, 3), 1 / 3))
    for n in (1, 5, 30):
        assert abs(collision_entropy_rate(c, n) - math.log(3)) < 1e-13


def test_collision_permutation_chain():
    c = ChainSpec.from_matrix(np.roll(np.eye(5), 1, axis=1)).with_stationary()
    for n in (1, 2, 7):
        assert abs(collision_entropy_rate(c, n) - math.log(5) / n) < 1e-13


def test_collision_brute_force(two_state):
    for n in (1, 2, 3, 6):
        assert abs(collision_entropy_rate(two_state, n) - collision_by_words(two_state.P, two_state.m, n)) < 1e-12


def test_collision_large_n_log_space(two_state):
    v = collision_entropy_rate(two_state, 5000)
    assert math.isfinite(v) and 0 < v < entropy_rate(two_state)


def test_collision_below_shannon_plus_boundary():
    rng = np.random.default_rng(5)
    chains = [random_chain(rng, k) for k in (2, 3, 5)]
    chains.append(ChainSpec.from_matrix([[0.9, 0.1], [0.2, 0.8]]).with_stationary())
    for c in chains:
        h = entropy_rate(c)
        for n in range(1, 51):
            assert collision_entropy_rate(c, n) <= h + math.log(c.n_states) / n + 1e-12


# -- JSON -----------------------------------------------------------------------


def test_json_roundtrip(tmp_path):
    nb = nonbacktracking_chain(complete_graph(4))
    doc = chain_to_dict(nb.chain, nb.terminal, PhiFunction([1, 0, 0, 0]))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    chain, proj, phi = load_chain(path)
    assert np.array_equal(chain.P, nb.chain.P)
    assert np.array_equal(proj.map, nb.terminal.map)
    assert list(phi.values) == [1, 0, 0, 0]


@pytest.mark.parametrize(
    "doc",
    [
        {"labels": ["a"], "transition": [[1.0]], "extra": 1},
        {"labels": ["a", "b"], "transition": [[1.0, "0"], [0, 1]]},
        {"labels": ["a", "b"], "transition": [[0.5, 0.5], [0.5, 0.5]], "projection": {"map": [0, 0]}},
        {"labels": ["a", "b"], "transition": [[0.5, 0.5], [0.5, 0.5]], "phi": [0.5]},
        {"transition": [[1.0]]},
        [1, 2],
    ],
)
def test_json_schema_strict(doc):
    with pytest.raises(SpecError):
        chain_from_dict(doc)
