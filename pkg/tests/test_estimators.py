import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from spectral_ld.estimators import AveragingOperatorEstimator
from spectral_ld.exceptions import SpecError
from spectral_ld.montecarlo import SimConfig, sample_path


@pytest.fixture
def two_state_paths(two_state):
    cfg = SimConfig(20_000, 0.5, 1, 42)
    return [sample_path(two_state, cfg, index=i) for i in range(5)]


def test_params_roundtrip():
    est = AveragingOperatorEstimator(n_states=3, pseudocount=0.5)
    params = est.get_params()
    assert params["n_states"] == 3 and params["pseudocount"] == 0.5
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(method="dense")
    assert est.method == "dense"


def test_fit_recovers_two_state(two_state_paths):
    est = AveragingOperatorEstimator().fit(two_state_paths)
    assert np.allclose(est.transition_matrix_, [[0.9, 0.1], [0.2, 0.8]], atol=0.01)
    assert np.allclose(est.stationary_distribution_, [2 / 3, 1 / 3], atol=0.02)
    assert abs(est.lambda_ - 0.7) < 0.02
    assert est.certificate_.holds


def test_transform_frequencies(two_state_paths):
    est = AveragingOperatorEstimator().fit(two_state_paths)
    Z = est.transform(two_state_paths)
    assert Z.shape == (5, 2)
    assert np.allclose(Z.sum(axis=1), 1.0)
    assert np.allclose(Z[:, 1], 1 / 3, atol=0.03)


def test_projection_parameter():
    paths = np.array([[0, 1, 2, 3, 0, 2, 1, 3, 0]])
    est = AveragingOperatorEstimator(n_states=4, projection=[0, 0, 1, 1], pseudocount=1.0).fit(paths)
    assert est.n_features_out_ == 2
    assert est.transform(paths).shape == (1, 2)


def test_tail_bound(two_state_paths):
    est = AveragingOperatorEstimator().fit(two_state_paths)
    rep = est.tail_bound([0.0, 1.0], 0.8, 200)
    assert 0 < rep.bound < 1 and rep.k_used >= 1


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        AveragingOperatorEstimator().transform([[0, 1]])


@pytest.mark.parametrize("X", [[[0.5, 1.0]], [[-1, 0]], [[]], []])
def test_bad_input(X):
    with pytest.raises(SpecError):
        AveragingOperatorEstimator().fit(X)


def test_unobserved_state_without_pseudocount():
    with pytest.raises(SpecError, match="no outgoing"):
        AveragingOperatorEstimator(n_states=3).fit([[0, 1, 0, 1]])
