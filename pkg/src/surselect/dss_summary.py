"""Expected-loss moments and the Kronecker-structured lasso problem.

The expected loss of a summary ``gamma`` (q x p) is, up to a constant,
``tr(M gamma S gamma^T) - 2 tr(A gamma^T)``.  With ``M = L L^T`` and
``S = Q Q^T`` it equals ``||(Q^T kron L^T) vec(gamma) - vec(L^-1 A Q^-T)||^2``
plus a constant.

``vec`` stacks columns, so design column ``i*q + j`` (zero based) belongs to
``gamma[j, i]``: response ``j``, predictor ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .exceptions import IllConditionedMomentsError, InvalidParameterError
from .model_core import omega_from_factor

__all__ = ["MomentSet", "LassoProblem", "jittered_cholesky", "compute_moments",
           "build_lasso_problem", "unpenalized_summary", "vec", "unvec",
           "expected_loss"]

MODES = ("random", "fixed")


def vec(gamma) -> np.ndarray:
    return np.asarray(gamma, dtype=float).ravel(order="F")


def unvec(v, q: int, p: int) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape((q, p), order="F")


def jittered_cholesky(mat, max_tries: int = 6) -> np.ndarray:
    """Lower Cholesky factor, adding ``1e-10 * trace/dim`` to the diagonal
    (then ten times more, up to ``max_tries`` times) if needed."""
    mat = 0.5 * (mat + mat.T)
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    n = mat.shape[0]
    jitter = 1e-10 * abs(np.trace(mat)) / n
    for _ in range(max_tries):
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise IllConditionedMomentsError(
        f"Cholesky failed after {max_tries} jitter escalations")


@dataclass(frozen=True)
class MomentSet:
    A: np.ndarray   # (q, p)
    S: np.ndarray   # (p, p)
    M: np.ndarray   # (q, q)
    L: np.ndarray   # chol(M)
    Q: np.ndarray   # chol(S)
    mode: str = "random"

    @classmethod
    def from_matrices(cls, A, S, M, mode: str = "random") -> "MomentSet":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        S = np.atleast_2d(np.asarray(S, dtype=float))
        M = np.atleast_2d(np.asarray(M, dtype=float))
        q, p = A.shape
        if S.shape != (p, p) or M.shape != (q, q):
            raise InvalidParameterError("moment shapes are inconsistent")
        return cls(A, S, M, jittered_cholesky(M), jittered_cholesky(S), mode)

    @property
    def q(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]


def compute_moments(draws: Sequence, mode: str = "random",
                    X_observed: Optional[np.ndarray] = None) -> MomentSet:
    """Posterior-mean moments from a sequence of draws.

    Random mode: ``A = mean(Omega beta^T Sigma_x)``, ``S = mean(Sigma_x)``.
    Fixed mode: ``A = mean(Omega beta^T X^T X)``, ``S = X^T X``.
    In both, ``M = mean(Omega)``.  Predictors are taken as centred.
    """
    if mode not in MODES:
        raise InvalidParameterError(f"mode must be one of {MODES}")
    if len(draws) == 0:
        raise InvalidParameterError("no posterior draws")
    if mode == "fixed":
        if X_observed is None:
            raise InvalidParameterError("fixed mode needs X_observed")
        Xo = np.asarray(X_observed, dtype=float)
        XtX = Xo.T @ Xo
    q, p = draws[0].q, draws[0].p
    A = np.zeros((q, p))
    S = np.zeros((p, p))
    M = np.zeros((q, q))
    for d in draws:
        om = omega_from_factor(d.b, d.psi_tilde)
        M += om
        if mode == "random":
            sx = d.sigma_x
            S += sx
            A += om @ d.beta.T @ sx
        else:
            A += om @ d.beta.T @ XtX
    n = len(draws)
    A /= n
    M /= n
    S = XtX.copy() if mode == "fixed" else S / n
    return MomentSet.from_matrices(A, S, M, mode)


@dataclass(frozen=True)
class LassoProblem:
    design: np.ndarray      # (pq, pq) = Q^T kron L^T
    target: np.ndarray      # (pq,) = vec(L^-1 A Q^-T)
    p: int
    q: int
    column_map: Tuple[Tuple[int, int], ...]  # column -> (response, predictor)

    def to_gamma(self, v) -> np.ndarray:
        return unvec(v, self.q, self.p)

    def to_vec(self, gamma) -> np.ndarray:
        return vec(gamma)


def build_lasso_problem(moments: MomentSet) -> LassoProblem:
    L, Q, A = moments.L, moments.Q, moments.A
    q, p = A.shape
    design = np.kron(Q.T, L.T)
    T1 = solve_triangular(L, A, lower=True)                 # L^-1 A
    T = solve_triangular(Q, T1.T, lower=True).T             # (Q^-1 T1^T)^T
    column_map = tuple((c % q, c // q) for c in range(p * q))
    return LassoProblem(design, vec(T), p, q, column_map)


def unpenalized_summary(moments: MomentSet) -> np.ndarray:
    """``M^-1 A S^-1``, the minimiser of the unpenalised expected loss."""
    Z = cho_solve((moments.L, True), moments.A)
    return cho_solve((moments.Q, True), Z.T).T


def expected_loss(moments: MomentSet, gamma) -> float:
    """``tr(M gamma S gamma^T) - 2 tr(A gamma^T)``."""
    g = np.asarray(gamma, dtype=float)
    return float(np.sum((moments.M @ g @ moments.S) * g) - 2.0 * np.sum(moments.A * g))
