"""Finite Markov shifts, state-space projections and averaging operators.

A Markov shift ``(Y, m, S)`` on a finite alphabet is stored as a
:class:`ChainSpec`; a state space is a surjection :class:`Projection` from
chain states to points of ``X``.  The compression of the Koopman operator
onto functions of ``X`` is an :class:`AveragingOp`.

The one-sided convention is used throughout: time runs forward and the
occupation average of ``phi`` over a path ``s_0, s_1, ...`` is
``(1/n) * sum(phi(pi(s_i)) for i in range(n))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.special import xlogy

from ._validation import (
    STOCHASTIC_ATOL,
    check_positive_int,
    check_probability_vector,
    check_transition_matrix,
    rational_array,
    rationalize,
)
from .exceptions import ConvergenceError, ReducibleChainError, SpecError

DENSE_STATIONARY_MAX = 2000
N_STEP_MAX = 10**6
PROPERTY_M_ATOL = 1e-10


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Row-stochastic transition matrix with state labels.

    Parameters
    ----------
    labels : sequence of str
        State names, one per row of ``P``.
    P : array_like, shape (n_states, n_states)
        Transition probabilities; rows sum to 1 within 1e-12.
    m : array_like, optional
        Stationary measure.  Validated against ``m @ P == m`` when given.
    """

    labels: tuple
    P: np.ndarray
    m: Optional[np.ndarray] = None
    exact_P: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        P = check_transition_matrix(self.P)
        object.__setattr__(self, "P", _readonly(P))
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != P.shape[0]:
            raise SpecError(f"{len(labels)} labels for {P.shape[0]} states")
        if len(set(labels)) != len(labels):
            raise SpecError("state labels must be unique")
        object.__setattr__(self, "labels", labels)
        if self.m is not None:
            m = check_probability_vector(self.m, P.shape[0], "stationary measure")
            resid = np.max(np.abs(m @ P - m))
            if resid > STOCHASTIC_ATOL:
                raise SpecError(f"measure is not stationary: max |mP - m| = {resid:.3e}")
            object.__setattr__(self, "m", _readonly(m))

    @property
    def n_states(self):
        return self.P.shape[0]

    @classmethod
    def from_matrix(cls, P, labels=None, m=None):
        P = np.asarray(P, dtype=float)
        if labels is None:
            labels = [str(i) for i in range(P.shape[0])]
        return cls(tuple(labels), P, m)

    def with_stationary(self):
        """Copy of the chain carrying its stationary measure."""
        if self.m is not None:
            return self
        return ChainSpec(self.labels, self.P, stationary_measure(self), self.exact_P)

    def rational_P(self):
        """Transition matrix as an object array of Fractions."""
        if self.exact_P is not None:
            return self.exact_P
        return rational_array(self.P, "transition matrix")


@dataclass(frozen=True, eq=False)
class Projection:
    """Surjection ``pi`` from chain states onto ``{0, ..., |X|-1}``."""

    map: np.ndarray
    x_labels: tuple

    def __post_init__(self):
        mp = np.asarray(self.map)
        if mp.ndim != 1 or mp.size == 0:
            raise SpecError("projection map must be a non-empty 1-d array")
        if not np.issubdtype(mp.dtype, np.integer):
            if np.issubdtype(mp.dtype, np.floating) and np.all(mp == np.round(mp)):
                mp = mp.astype(np.int64)
            else:
                raise SpecError("projection map entries must be integers")
        x_labels = tuple(str(s) for s in self.x_labels)
        k = len(x_labels)
        if np.any(mp < 0) or np.any(mp >= k):
            raise SpecError(f"projection map values must lie in 0..{k - 1}")
        missing = sorted(set(range(k)) - set(int(v) for v in mp))
        if missing:
            raise SpecError(f"projection is not surjective; unused X-points {missing}")
        mp = np.array(mp, dtype=np.int64)
        mp.setflags(write=False)
        object.__setattr__(self, "map", mp)
        object.__setattr__(self, "x_labels", x_labels)

    @property
    def n_points(self):
        return len(self.x_labels)

    @classmethod
    def identity(cls, labels):
        labels = list(labels)
        return cls(np.arange(len(labels)), tuple(labels))

    @classmethod
    def collapse(cls, n_states, label="*"):
        return cls(np.zeros(n_states, dtype=np.int64), (label,))

    def indicator(self, dtype=float):
        """Matrix ``E`` with ``E[i, x] = 1`` iff ``pi(i) = x``."""
        E = np.zeros((self.map.size, self.n_points), dtype=dtype)
        E[np.arange(self.map.size), self.map] = 1
        return E

    def check_compatible(self, chain):
        if self.map.size != chain.n_states:
            raise SpecError(f"projection covers {self.map.size} states, chain has {chain.n_states}")


@dataclass(frozen=True, eq=False)
class AveragingOp:
    """Averaging operator on ``X`` with its reference measure."""

    T: np.ndarray
    mX: np.ndarray
    x_labels: tuple = ()

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise SpecError("averaging operator must be square")
        mX = check_probability_vector(self.mX, T.shape[0], "reference measure")
        if np.max(np.abs(T.sum(axis=1) - 1.0)) > STOCHASTIC_ATOL:
            raise SpecError("averaging operator does not preserve constants")
        if np.max(np.abs(mX @ T - mX)) > STOCHASTIC_ATOL:
            raise SpecError("reference measure is not invariant under the operator")
        object.__setattr__(self, "T", _readonly(T))
        object.__setattr__(self, "mX", _readonly(mX))
        if not self.x_labels:
            object.__setattr__(self, "x_labels", tuple(str(i) for i in range(T.shape[0])))
        else:
            object.__setattr__(self, "x_labels", tuple(str(s) for s in self.x_labels))

    @property
    def n_points(self):
        return self.T.shape[0]


@dataclass(frozen=True, eq=False)
class PhiFunction:
    """Observable on ``X`` with values in ``[0, 1]``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise SpecError("phi must be a non-empty vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise SpecError("phi values must lie in [0, 1]")
        object.__setattr__(self, "values", _readonly(v))

    def mean(self, mX):
        return float(np.dot(np.asarray(mX, dtype=float), self.values))

    @classmethod
    def indicator(cls, size, points):
        v = np.zeros(size)
        v[list(points)] = 1.0
        return cls(v)


@dataclass(frozen=True)
class PropertyMCertificate:
    holds_up_to: int
    n_max: int
    first_violation: Optional[tuple] = None
    exact: bool = False

    @property
    def holds(self):
        return self.first_violation is None

    def to_dict(self):
        out = {"holds_up_to": self.holds_up_to, "n_max": self.n_max, "exact": self.exact}
        if self.first_violation is None:
            out["first_violation"] = None
        else:
            n, gap = self.first_violation
            out["first_violation"] = {"n": n, "gap": float(gap)}
            if isinstance(gap, Fraction):
                out["first_violation"]["gap_exact"] = str(gap)
        return out


# -- communicating structure ------------------------------------------------


def communicating_classes(P):
    """Strongly connected components of the transition graph.

    Returns ``(classes, closed)`` where ``closed[c]`` tells whether class
    ``c`` has no transition leaving it.
    """
    P = np.asarray(P)
    n_comp, lab = connected_components(P > 0, directed=True, connection="strong")
    classes = [np.flatnonzero(lab == c) for c in range(n_comp)]
    closed = []
    for members in classes:
        outside = np.ones(P.shape[0], dtype=bool)
        outside[members] = False
        closed.append(not np.any(P[np.ix_(members, outside)] > 0))
    return classes, closed


def _check_single_closed_class(chain):
    classes, closed = communicating_classes(chain.P)
    if sum(closed) != 1:
        named = [[chain.labels[i] for i in c] for c in classes]
        raise ReducibleChainError(
            f"chain is reducible: {sum(closed)} closed classes among communicating classes {named}",
            classes=named,
        )


def check_irreducible(chain, m=None):
    """Raise unless the chain restricted to the support of ``m`` is irreducible."""
    m = _measure_of(chain) if m is None else m
    support = np.flatnonzero(m > 0)
    sub = chain.P[np.ix_(support, support)]
    n_comp, _ = connected_components(sub > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise ReducibleChainError("chain restricted to the support of its measure is reducible")


# -- stationary measure -----------------------------------------------------


def _stationary_dense(P):
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    m = np.linalg.solve(A, b)
    for _ in range(3):
        r = b - A @ m
        if np.max(np.abs(r)) < 1e-16:
            break
        m = m + np.linalg.solve(A, r)
    return m


def _stationary_power(P, tol=1e-13, max_iter=10**5):
    # lazy chain: same stationary measure, aperiodic
    L = 0.5 * (P + np.eye(P.shape[0]))
    m = np.full(P.shape[0], 1.0 / P.shape[0])
    hist = []
    for it in range(1, max_iter + 1):
        m = m @ L
        m /= m.sum()
        hist.append(m)
        if len(hist) == 3:
            x0, x1, x2 = hist
            denom = x2 - 2 * x1 + x0
            with np.errstate(divide="ignore", invalid="ignore"):
                acc = np.where(np.abs(denom) > 1e-300, x2 - (x2 - x1) ** 2 / denom, x2)
            if np.all(np.isfinite(acc)) and np.all(acc >= -1e-15):
                acc = np.clip(acc, 0.0, None)
                acc /= acc.sum()
                if np.max(np.abs(acc @ P - acc)) < np.max(np.abs(m @ P - m)):
                    m = acc
            hist = []
        if np.max(np.abs(m @ P - m)) < tol:
            return m, it
    raise ConvergenceError(
        "power iteration for the stationary measure did not converge",
        residual=float(np.max(np.abs(m @ P - m))),
        iterations=max_iter,
    )


def stationary_measure(chain):
    """Stationary probability vector of ``chain``.

    Uses a direct linear solve up to 2000 states and power iteration with
    Aitken extrapolation above.  Raises :class:`ReducibleChainError` when
    there is more than one closed communicating class.
    """
    P = chain.P if isinstance(chain, ChainSpec) else check_transition_matrix(chain)
    if not isinstance(chain, ChainSpec):
        chain = ChainSpec.from_matrix(P)
    _check_single_closed_class(chain)
    if P.shape[0] <= DENSE_STATIONARY_MAX:
        m = _stationary_dense(P)
    else:
        m, _ = _stationary_power(P)
    m = np.where(np.abs(m) < 1e-17, 0.0, m)
    m = np.clip(m, 0.0, None)
    m /= m.sum()
    resid = np.max(np.abs(m @ P - m))
    if resid >= 1e-12:
        raise ConvergenceError(f"stationary residual {resid:.3e} exceeds 1e-12", residual=float(resid))
    return m


def _measure_of(chain):
    if chain.m is not None:
        return chain.m
    return stationary_measure(chain)


# -- averaging operators ----------------------------------------------------


def _marginalize(Pn, m, proj):
    E = proj.indicator()
    mX = E.T @ m
    if np.any(mX <= 0):
        null = [proj.x_labels[i] for i in np.flatnonzero(mX <= 0)]
        raise SpecError(f"X-points {null} have zero mass; conditional expectation undefined")
    W = E.T @ (m[:, None] * Pn) @ E
    return W / mX[:, None], mX


def averaging_operator(chain, proj=None):
    """Compression ``T = P_X U_S P_X`` of the shift onto functions of ``X``.

    ``T[x, x'] = sum_{pi(i)=x} (m_i / mX_x) sum_{pi(j)=x'} P_ij``.
    """
    if proj is None:
        proj = Projection.identity(chain.labels)
    proj.check_compatible(chain)
    m = _measure_of(chain)
    T, mX = _marginalize(chain.P, m, proj)
    return AveragingOp(T, mX, proj.x_labels)


def n_step_operator(chain, proj, n):
    """Averaging operator of ``S^n`` computed from exact ``n``-step statistics.

    ``[x, x']`` is ``P(pi(s_n) = x' | pi(s_0) = x)`` for the stationary chain.
    """
    n = check_positive_int(n, "n", allow_zero=True)
    if n > N_STEP_MAX:
        raise SpecError(f"n={n} exceeds the supported maximum {N_STEP_MAX}")
    if proj is None:
        proj = Projection.identity(chain.labels)
    proj.check_compatible(chain)
    if n == 0:
        return np.eye(proj.n_points)
    m = _measure_of(chain)
    T, _ = _marginalize(np.linalg.matrix_power(chain.P, n), m, proj)
    return T


# -- property (M) -------------------------------------------------------------


def check_property_m(chain, proj=None, n_max=10, exact=False):
    """Certify the semigroup identity ``T_{S^n} = T^n`` for ``n = 2..n_max``.

    With ``exact=True`` the comparison runs in rational arithmetic and a
    reported gap is an exact :class:`fractions.Fraction`.
    """
    n_max = check_positive_int(n_max, "n_max")
    if n_max < 2:
        raise SpecError("n_max must be at least 2")
    if proj is None:
        proj = Projection.identity(chain.labels)
    proj.check_compatible(chain)
    if exact:
        return _check_property_m_exact(chain, proj, n_max)

    m = _measure_of(chain)
    T, _ = _marginalize(chain.P, m, proj)
    Pn = chain.P.copy()
    Tn = T.copy()
    for n in range(2, n_max + 1):
        Pn = Pn @ chain.P
        Tn = Tn @ T
        lhs, _ = _marginalize(Pn, m, proj)
        gap = float(np.max(np.abs(lhs - Tn)))
        if gap > PROPERTY_M_ATOL:
            return PropertyMCertificate(n - 1, n_max, (n, gap), exact=False)
    return PropertyMCertificate(n_max, n_max, None, exact=False)


def _lcm(values):
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


def exact_stationary(Pq):
    """Stationary measure of a rational irreducible chain (GTH elimination)."""
    A = np.array(Pq, dtype=object, copy=True)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = sum(A[k, :k], Fraction(0))
        if s == 0:
            raise ReducibleChainError("exact stationary solve needs an irreducible chain")
        A[:k, k] = A[:k, k] / s
        A[:k, :k] = A[:k, :k] + np.outer(A[:k, k], A[k, :k])
    pi = [Fraction(1)]
    for k in range(1, n):
        pi.append(sum((pi[i] * A[i, k] for i in range(k)), Fraction(0)))
    total = sum(pi, Fraction(0))
    return np.array([p / total for p in pi], dtype=object)


def _exact_measure(chain, Pq):
    # a supplied measure that is exactly stationary wins, so chains with
    # several closed classes (e.g. the edge shift of a cycle) still certify
    if chain.m is not None:
        given = np.array([rationalize(x) for x in chain.m], dtype=object)
        if all(g is not None for g in given) and sum(given) == 1 and np.all(given.dot(Pq) == given):
            return given
    classes, _ = communicating_classes(chain.P)
    if len(classes) == 1:
        m = exact_stationary(Pq)
    else:
        _check_single_closed_class(chain)
        m = np.array([rationalize(x) for x in _measure_of(chain)], dtype=object)
        if any(x is None for x in m):
            raise SpecError("stationary measure has no exact rational form")
    if not np.all(m.dot(Pq) == m):
        raise SpecError("exact stationary measure failed verification")
    return m


def _check_property_m_exact(chain, proj, n_max):
    Pq = chain.rational_P()
    if any(sum(row, Fraction(0)) != 1 for row in Pq):
        raise SpecError("rational transition rows do not sum to exactly 1")
    m = _exact_measure(chain, Pq)

    # integerize: P = N / q, m = a / qm
    q = _lcm(int(x.denominator) for x in Pq.flat)
    N = np.array([[int(x * q) for x in row] for row in Pq], dtype=object)
    qm = _lcm(int(x.denominator) for x in m)
    a = np.array([int(x * qm) for x in m], dtype=object)

    E = proj.indicator(dtype=object)
    Ax = E.T.dot(a)
    if any(v == 0 for v in Ax):
        raise SpecError("some X-point has zero mass; conditional expectation undefined")
    aN_left = (E.T * a[None, :])  # rows: X-points, weights a_i

    W1 = aN_left.dot(N).dot(E)
    L = _lcm(int(v) for v in Ax)
    V = np.array([[W1[x, y] * (L // Ax[x]) for y in range(W1.shape[1])] for x in range(W1.shape[0])], dtype=object)

    Nn = N.copy()
    Vn = V.copy()
    for n in range(2, n_max + 1):
        Nn = Nn.dot(N)
        Vn = Vn.dot(V)
        Wn = aN_left.dot(Nn).dot(E)
        scale_lhs = L**n
        worst = Fraction(0)
        for x in range(Wn.shape[0]):
            for y in range(Wn.shape[1]):
                if Wn[x, y] * scale_lhs != Vn[x, y] * Ax[x]:
                    diff = abs(Fraction(int(Wn[x, y]), int(q**n * Ax[x])) - Fraction(int(Vn[x, y]), int((L * q) ** n)))
                    worst = max(worst, diff)
        if worst != 0:
            return PropertyMCertificate(n - 1, n_max, (n, worst), exact=True)
    return PropertyMCertificate(n_max, n_max, None, exact=True)


# -- entropy ----------------------------------------------------------------


def entropy_rate(chain):
    """Kolmogorov-Sinai entropy ``-sum_i m_i sum_j P_ij log P_ij`` in nats."""
    m = _measure_of(chain)
    return float(max(0.0, -np.dot(m, xlogy(chain.P, chain.P).sum(axis=1))))


def collision_entropy_rate(chain, n):
    """Order-2 Renyi entropy rate of length-``n`` cylinders.

    ``-(1/n) log sum_w mu(w)^2``, evaluated as
    ``-(1/n) log(1^T diag(m^2) Q^(n-1) 1)`` with ``Q = P**2``.  The vector is
    rescaled by powers of two each step, which is exact, so uniform
    i.i.d. chains give ``log q`` to the last bit.
    """
    n = check_positive_int(n, "n")
    m = _measure_of(chain)
    Q = chain.P**2
    v = np.ones(chain.n_states)
    scale = 0
    for _ in range(n - 1):
        v = Q @ v
        s = v.max()
        if s == 0:
            return math.inf
        e = math.frexp(s)[1]
        v = np.ldexp(v, -e)
        scale += e
    mant, e = math.frexp(float(np.dot(m * m, v)))
    if mant == 0:
        return math.inf
    # total = (2 mant) 2^(scale + e - 1) with 2 mant in [1, 2)
    return -(math.log(2 * mant) / n + ((scale + e - 1) / n) * math.log(2))


# -- JSON interface ---------------------------------------------------------

_CHAIN_KEYS = {"labels", "transition", "measure", "projection", "phi"}
_PROJ_KEYS = {"map", "x_labels"}


def _number_list(seq, what):
    if not isinstance(seq, list):
        raise SpecError(f"{what} must be an array")
    for v in seq:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SpecError(f"{what} must contain only numbers, found {v!r}")
    return seq


def chain_from_dict(doc):
    """Parse the ChainSpec JSON document.

    Returns ``(chain, projection, phi)``; the last two may be None.
    """
    if not isinstance(doc, dict):
        raise SpecError("chain document must be a JSON object")
    unknown = set(doc) - _CHAIN_KEYS
    if unknown:
        raise SpecError(f"unknown keys in chain document: {sorted(unknown)}")
    for key in ("labels", "transition"):
        if key not in doc:
            raise SpecError(f"chain document is missing {key!r}")
    labels = doc["labels"]
    if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
        raise SpecError("labels must be an array of strings")
    rows = doc["transition"]
    if not isinstance(rows, list) or not rows:
        raise SpecError("transition must be a non-empty array of rows")
    for i, row in enumerate(rows):
        _number_list(row, f"transition row {i}")
    if len({len(r) for r in rows}) != 1:
        raise SpecError("transition rows have unequal lengths")
    measure = doc.get("measure")
    if measure is not None:
        _number_list(measure, "measure")
    chain = ChainSpec(tuple(labels), np.array(rows, dtype=float), measure)

    proj = None
    if doc.get("projection") is not None:
        pdoc = doc["projection"]
        if not isinstance(pdoc, dict):
            raise SpecError("projection must be an object")
        unknown = set(pdoc) - _PROJ_KEYS
        if unknown:
            raise SpecError(f"unknown keys in projection: {sorted(unknown)}")
        if set(pdoc) != _PROJ_KEYS:
            raise SpecError("projection needs both 'map' and 'x_labels'")
        _number_list(pdoc["map"], "projection map")
        if not all(isinstance(v, int) for v in pdoc["map"]):
            raise SpecError("projection map must contain integers")
        xl = pdoc["x_labels"]
        if not isinstance(xl, list) or not all(isinstance(s, str) for s in xl):
            raise SpecError("x_labels must be an array of strings")
        proj = Projection(np.array(pdoc["map"], dtype=np.int64), tuple(xl))
        proj.check_compatible(chain)

    phi = None
    if doc.get("phi") is not None:
        _number_list(doc["phi"], "phi")
        phi = PhiFunction(np.array(doc["phi"], dtype=float))
        size = proj.n_points if proj is not None else chain.n_states
        if phi.values.size != size:
            raise SpecError(f"phi has length {phi.values.size}, state space has {size} points")
    return chain, proj, phi


def load_chain(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: invalid JSON ({exc})") from None
    return chain_from_dict(doc)


def chain_to_dict(chain, proj=None, phi=None):
    doc = {"labels": list(chain.labels), "transition": chain.P.tolist()}
    if chain.m is not None:
        doc["measure"] = chain.m.tolist()
    if proj is not None:
        doc["projection"] = {"map": [int(v) for v in proj.map], "x_labels": list(proj.x_labels)}
    if phi is not None:
        doc["phi"] = phi.values.tolist()
    return doc


def permute_chain(chain, perm: Sequence[int]):
    """Relabel states: new state ``k`` is old state ``perm[k]``."""
    perm = np.asarray(perm)
    P = chain.P[np.ix_(perm, perm)]
    m = None if chain.m is None else chain.m[perm]
    return ChainSpec(tuple(chain.labels[i] for i in perm), P, m)
