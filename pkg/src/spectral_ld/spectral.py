"""Operator norms under the measure-weighted inner product.

In ``L^2(X, mX)`` an operator ``A`` corresponds to the Euclidean matrix
``D^{1/2} A D^{-1/2}`` with ``D = diag(mX)``.  The ``L^2_0`` norm is the top
singular value of that matrix after projecting off the unit vector
``sqrt(mX)`` on both sides.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.sparse.linalg import eigs

from ._validation import check_probability_vector, check_square_matrix
from .chain_model import AveragingOp
from .exceptions import ConvergenceError, SpecError

DENSE_MAX = 500
RADIUS_DENSE_MAX = 2000
POWER_TOL = 1e-10
POWER_MAX_ITER = 10**5


@dataclass(frozen=True)
class SpectralReport:
    lambda_: float
    method: str
    iterations: int
    residual: float
    spectral_radius_l20: Optional[float] = None

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return {k: d[k] for k in ("lambda", "method", "iterations", "residual", "spectral_radius_l20")}


def _symmetrized(A, mX):
    s = np.sqrt(mX)
    return (s[:, None] * A) / s[None, :]


def _start_vector(n, u=None):
    # alternating signs with a ramp, so no symmetric fixture is orthogonal to it
    v = np.where(np.arange(n) % 2 == 0, 1.0, -1.0) * (1.0 + np.arange(n) / n)
    if u is not None:
        v = v - u * np.dot(u, v)
    nv = np.linalg.norm(v)
    return v / nv if nv > 0 else v


def _top_singular_dense(M):
    G = M.T @ M
    w, V = np.linalg.eigh(G)
    sigma2 = max(float(w[-1]), 0.0)
    v = V[:, -1]
    residual = float(np.linalg.norm(G @ v - w[-1] * v))
    return float(np.sqrt(sigma2)), residual


def _top_singular_power(M, u=None, tol=POWER_TOL, max_iter=POWER_MAX_ITER):
    """Power iteration on the Gram operator ``M^T M``.

    ``u`` (unit vector) is deflated from every iterate when given.
    """
    n = M.shape[1]
    v = _start_vector(n, u)
    if not np.any(v):
        return 0.0, 0.0, 0
    rho_old = None
    residual = np.inf
    for it in range(1, max_iter + 1):
        w = M.T @ (M @ v)
        if u is not None:
            w -= u * np.dot(u, w)
        rho = float(np.dot(v, w))
        residual = float(np.linalg.norm(w - rho * v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, 0.0, it
        if rho_old is not None and abs(rho - rho_old) <= tol * max(rho, 1e-300) and residual <= 1e-9 * max(rho, 1.0):
            return float(np.sqrt(max(rho, 0.0))), residual, it
        rho_old = rho
        v = w / nw
    raise ConvergenceError("power iteration on the Gram operator did not converge", residual=residual, iterations=max_iter)


def _radius(M):
    n = M.shape[0]
    if n <= RADIUS_DENSE_MAX:
        return float(np.max(np.abs(np.linalg.eigvals(M))))
    vals = eigs(M, k=1, which="LM", return_eigenvectors=False)
    return float(np.abs(vals[0]))


def _resolve_method(method, n):
    if method == "auto":
        return "dense" if n <= DENSE_MAX else "power_iteration"
    if method in ("dense", "power_iteration"):
        return method
    raise SpecError(f"unknown method {method!r}")


def l20_matrix_norm(A, mX, method="auto", radius=True):
    """``L^2_0(mX)`` norm of a matrix that keeps the constants and ``mX`` invariant up to scale.

    This covers averaging operators and also unnormalized operators such as
    the non-backtracking matrix of a regular graph.
    """
    A = check_square_matrix(A, "operator")
    mX = check_probability_vector(mX, A.shape[0], "reference measure")
    if np.any(mX <= 0):
        raise SpecError("reference measure has a zero entry")
    method = _resolve_method(method, A.shape[0])
    u = np.sqrt(mX)
    M = _symmetrized(A, mX)
    Pi = np.eye(A.shape[0]) - np.outer(u, u)
    M0 = Pi @ M @ Pi
    if method == "dense":
        lam, residual = _top_singular_dense(M0)
        iterations = 0
    else:
        lam, residual, iterations = _top_singular_power(M0, u)
    rho = _radius(M0) if radius else None
    return SpectralReport(lam, method, iterations, residual, rho)


def l20_norm(op: AveragingOp, method="auto"):
    """Norm of an averaging operator on the complement of the constants.

    Returns a :class:`SpectralReport` whose ``lambda_`` is the largest
    singular value of ``Pi T~ Pi`` (``T~`` symmetrized, ``Pi`` projecting off
    ``sqrt(mX)``).  The spectral radius on the same subspace is reported for
    comparison only; bounds always use the norm.
    """
    if not isinstance(op, AveragingOp):
        raise SpecError("l20_norm expects an AveragingOp; use l20_matrix_norm for raw matrices")
    return l20_matrix_norm(op.T, op.mX, method=method)


def weighted_operator_norm(A, mX, method="auto"):
    """Full-space operator norm of ``A`` on ``L^2(mX)`` (constants not deflated)."""
    A = check_square_matrix(A, "operator")
    mX = check_probability_vector(mX, A.shape[0], "reference measure")
    if np.any(mX <= 0):
        raise SpecError("reference measure has a zero entry")
    method = _resolve_method(method, A.shape[0])
    M = _symmetrized(A, mX)
    if method == "dense":
        return _top_singular_dense(M)[0]
    return _top_singular_power(M)[0]


def tilted_operator(op: AveragingOp, phi, r):
    """``M T M`` with ``M`` multiplication by ``exp(r phi / 2)``."""
    phi = np.asarray(getattr(phi, "values", phi), dtype=float)
    h = np.exp(0.5 * r * phi)
    return h[:, None] * op.T * h[None, :]
