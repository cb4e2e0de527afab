"""Independent reference computations used only by the tests.

Nothing here imports the package's numerical routines; each oracle
recomputes its target from first principles (path enumeration, mpmath,
networkx, closed forms).
"""

import itertools
import math
from fractions import Fraction

import mpmath
import networkx as nx
import numpy as np

mpmath.mp.dps = 40


def kl_mp(a, b):
    a, b = mpmath.mpf(a), mpmath.mpf(b)
    total = mpmath.mpf(0)
    if a > 0:
        total += a * mpmath.log(a / b)
    if a < 1:
        total += (1 - a) * mpmath.log((1 - a) / (1 - b))
    return total


def stationary_by_eig(P):
    w, V = np.linalg.eig(np.asarray(P).T)
    v = np.real(V[:, np.argmin(np.abs(w - 1))])
    return v / v.sum()


def path_mgf(P, m, phi_states, r, n):
    """Brute-force ``E exp(r sum phi)`` over all length-``n`` paths."""
    S = len(m)
    total = 0.0
    for path in itertools.product(range(S), repeat=n):
        p = m[path[0]]
        for a, b in zip(path, path[1:]):
            p *= P[a][b]
            if p == 0:
                break
        if p:
            total += p * math.exp(r * sum(phi_states[s] for s in path))
    return total


def path_tail(P, m, phi_states, eta, n, upper=True):
    """Brute-force ``P(A_n >= eta)`` with exact rational sums of ``phi``."""
    S = len(m)
    phi_q = [Fraction(x).limit_denominator(64) for x in phi_states]
    eta_q = Fraction(eta).limit_denominator(10**12)
    total = 0.0
    for path in itertools.product(range(S), repeat=n):
        avg = sum(phi_q[s] for s in path) / n
        if (avg >= eta_q) if upper else (avg <= eta_q):
            p = m[path[0]]
            for a, b in zip(path, path[1:]):
                p *= P[a][b]
            total += p
    return total


def collision_by_words(P, m, n):
    """``-(1/n) log sum_w mu(w)^2`` over all length-``n`` words."""
    S = len(m)
    total = mpmath.mpf(0)
    for w in itertools.product(range(S), repeat=n):
        p = mpmath.mpf(m[w[0]])
        for a, b in zip(w, w[1:]):
            p *= P[a][b]
        total += p * p
    return float(-mpmath.log(total) / n)


def weighted_norm_oracle(A, mX, deflate=True):
    """Operator norm on ``L^2(mX)`` (or its zero-mean subspace) via a basis of the subspace and SVD."""
    A = np.asarray(A, dtype=float)
    mX = np.asarray(mX, dtype=float)
    n = len(mX)
    if deflate:
        # orthonormal basis of {f : sum mX f = 0} in L^2(mX)
        raw = np.column_stack([np.eye(n)[:, j] - mX[j] for j in range(1, n)])
    else:
        raw = np.eye(n)
    G = raw.T @ (mX[:, None] * raw)
    L = np.linalg.cholesky(G)
    Q = raw @ np.linalg.inv(L).T  # mX-orthonormal columns
    # matrix of A restricted and then projected back onto the subspace
    AQ = A @ Q
    if deflate:
        AQ = AQ - np.outer(np.ones(n), mX @ AQ)
    coords = Q.T @ (mX[:, None] * AQ)
    return float(np.linalg.svd(coords, compute_uv=False)[0]) if coords.size else 0.0


def petersen_nx():
    return nx.petersen_graph()


def nx_edges(G):
    return sorted(tuple(sorted(e)) for e in G.edges())


def ihara_radius_nx(G):
    d = next(iter(dict(G.degree()).values()))
    mu = np.linalg.eigvalsh(nx.to_numpy_array(G))
    best = 0.0
    for x in mu:
        if abs(abs(x) - d) < 1e-9:
            continue
        disc = complex(x * x - 4 * (d - 1)) ** 0.5
        best = max(best, abs((x + disc) / 2), abs((x - disc) / 2))
    return best
