"""scikit-learn style wrapper: estimate a chain from trajectories and certify it."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .chain_model import ChainSpec, PhiFunction, Projection, averaging_operator, check_property_m, stationary_measure
from .exceptions import SpecError
from .ld_bounds import LDQuery, ld_tail_optimize
from .spectral import l20_norm


def _check_paths(X, n_states=None):
    """Coerce trajectories to a list of 1-D int arrays."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        paths = [np.asarray(row) for row in X]
    elif isinstance(X, np.ndarray) and X.ndim == 1 and X.dtype != object:
        paths = [X]
    else:
        paths = [np.asarray(p) for p in X]
    out = []
    for p in paths:
        if p.ndim != 1 or p.size == 0:
            raise SpecError("each trajectory must be a non-empty 1-D sequence of state indices")
        if not np.issubdtype(p.dtype, np.integer):
            if not np.all(np.equal(np.mod(p, 1), 0)):
                raise SpecError("trajectories must contain integer state indices")
            p = p.astype(np.int64)
        if np.any(p < 0) or (n_states is not None and np.any(p >= n_states)):
            raise SpecError("state index out of range")
        out.append(p.astype(np.int64))
    if not out:
        raise SpecError("no trajectories given")
    return out


class AveragingOperatorEstimator(TransformerMixin, BaseEstimator):
    """Maximum-likelihood chain from observed trajectories, projected onto ``X``.

    Parameters
    ----------
    n_states : int, optional
        Number of chain states; inferred from the data when omitted.
    projection : array-like of int, optional
        State-to-point map; the identity when omitted.
    pseudocount : float
        Added to every transition count before normalizing.
    method : {"auto", "dense", "power_iteration"}
        Solver for the ``L^2_0`` norm.
    n_max : int
        Depth of the property (M) check run during ``fit``.

    Attributes
    ----------
    transition_matrix_ : ndarray
    stationary_distribution_ : ndarray
    chain_ : ChainSpec
    operator_ : AveragingOp
    certificate_ : PropertyMCertificate
    spectral_report_ : SpectralReport
    lambda_ : float
    """

    def __init__(self, n_states=None, projection=None, pseudocount=0.0, method="auto", n_max=10):
        self.n_states = n_states
        self.projection = projection
        self.pseudocount = pseudocount
        self.method = method
        self.n_max = n_max

    def fit(self, X, y=None):
        paths = _check_paths(X, self.n_states)
        S = self.n_states if self.n_states is not None else int(max(p.max() for p in paths)) + 1
        counts = np.full((S, S), float(self.pseudocount))
        for p in paths:
            np.add.at(counts, (p[:-1], p[1:]), 1.0)
        totals = counts.sum(axis=1)
        if np.any(totals == 0):
            raise SpecError(f"no outgoing transitions observed from states {np.flatnonzero(totals == 0).tolist()}")
        P = counts / totals[:, None]
        chain = ChainSpec.from_matrix(P)
        m = stationary_measure(chain)
        self.chain_ = ChainSpec(chain.labels, P, m)
        if self.projection is None:
            self.projection_ = Projection.identity(self.chain_.labels)
        else:
            pmap = np.asarray(self.projection, dtype=np.int64)
            self.projection_ = Projection(pmap, tuple(str(i) for i in range(int(pmap.max()) + 1)))
        self.transition_matrix_ = P
        self.stationary_distribution_ = m
        self.operator_ = averaging_operator(self.chain_, self.projection_)
        self.certificate_ = check_property_m(self.chain_, self.projection_, self.n_max)
        self.spectral_report_ = l20_norm(self.operator_, method=self.method)
        self.lambda_ = self.spectral_report_.lambda_
        self.n_features_out_ = self.projection_.n_points
        return self

    def transform(self, X):
        """Occupation frequencies of each ``X``-point along each trajectory."""
        check_is_fitted(self, "operator_")
        paths = _check_paths(X, self.chain_.n_states)
        out = np.zeros((len(paths), self.projection_.n_points))
        for i, p in enumerate(paths):
            out[i] = np.bincount(self.projection_.map[p], minlength=self.projection_.n_points) / p.size
        return out

    def tail_bound(self, phi, eta, n, k_max=64, tail="upper"):
        """Optimized tail bound for ``phi`` on ``X`` using the fitted ``lambda_``."""
        check_is_fitted(self, "operator_")
        phi = phi if isinstance(phi, PhiFunction) else PhiFunction(phi)
        m_phi = min(max(phi.mean(self.operator_.mX), 0.0), 1.0)
        return ld_tail_optimize(LDQuery(eta, m_phi, min(self.lambda_, 1.0), n, tail), k_max=k_max)
