"""Joint Gaussian model for (Y, X): parameter containers, the implied block
covariance and posterior-predictive simulation.

All regression arithmetic works on column-centred data.  The sample means are
kept on the :class:`Dataset` so predictive draws can be mapped back to the
original scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import InvalidParameterError

__all__ = [
    "Dataset",
    "JointParams",
    "PosteriorDraw",
    "block_covariance",
    "sample_predictive",
    "omega_from_factor",
]


@dataclass(frozen=True)
class Dataset:
    """Observed responses ``Y`` (N x q) and predictors ``X`` (N x p).

    ``Y`` and ``X`` hold the centred data; ``y_mean`` and ``x_mean`` the
    column means that were removed.
    """

    Y: np.ndarray
    X: np.ndarray
    response_names: tuple = ()
    predictor_names: tuple = ()
    y_mean: Optional[np.ndarray] = None
    x_mean: Optional[np.ndarray] = None

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if Y.shape[0] != X.shape[0]:
            raise InvalidParameterError(
                f"Y has {Y.shape[0]} rows but X has {X.shape[0]} rows")
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
            raise InvalidParameterError("data contain missing or non-finite values")
        N, p = X.shape
        q = Y.shape[1]
        if N <= p + 1:
            raise InvalidParameterError(f"need N > p + 1, got N={N}, p={p}")
        rnames = tuple(self.response_names) or tuple(f"y{j + 1}" for j in range(q))
        pnames = tuple(self.predictor_names) or tuple(f"x{i + 1}" for i in range(p))
        if len(rnames) != q or len(pnames) != p:
            raise InvalidParameterError("column name count does not match data")
        y_mean = np.zeros(q) if self.y_mean is None else np.asarray(self.y_mean, float)
        x_mean = np.zeros(p) if self.x_mean is None else np.asarray(self.x_mean, float)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "response_names", rnames)
        object.__setattr__(self, "predictor_names", pnames)
        object.__setattr__(self, "y_mean", y_mean)
        object.__setattr__(self, "x_mean", x_mean)

    @classmethod
    def from_arrays(cls, Y, X, response_names: Sequence[str] = (),
                    predictor_names: Sequence[str] = ()) -> "Dataset":
        """Centre raw arrays column-wise and keep the means."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if Y.shape[0] == 1 and X.shape[0] > 1:
            Y = Y.T
        y_mean = Y.mean(axis=0)
        x_mean = X.mean(axis=0)
        return cls(Y - y_mean, X - x_mean, tuple(response_names),
                   tuple(predictor_names), y_mean, x_mean)

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Y.shape[1]


def omega_from_factor(b, psi_tilde) -> np.ndarray:
    """Precision of ``b b^T + diag(psi_tilde)`` by the rank-one update formula."""
    b = np.asarray(b, dtype=float)
    d = 1.0 / np.asarray(psi_tilde, dtype=float)
    u = d * b
    return np.diag(d) - np.outer(u, u) / (1.0 + b @ u)


@dataclass(frozen=True)
class JointParams:
    """One parameter state of the joint model.

    Shapes: ``beta`` (p, q), ``b`` (q,), ``psi_tilde`` (q,) diagonal of the
    idiosyncratic residual covariance, ``B_load`` (p, k), ``Lambda`` (p,)
    diagonal of the predictor idiosyncratic covariance, ``alpha`` (p,) boolean.
    """

    beta: np.ndarray
    b: np.ndarray
    psi_tilde: np.ndarray
    B_load: np.ndarray
    Lambda: np.ndarray
    mu_x: np.ndarray
    mu_y: np.ndarray
    alpha: Optional[np.ndarray] = None

    def __post_init__(self):
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        p, q = beta.shape
        b = np.asarray(self.b, dtype=float).reshape(q)
        psi_tilde = np.asarray(self.psi_tilde, dtype=float).reshape(q)
        B_load = np.asarray(self.B_load, dtype=float).reshape(p, -1)
        Lambda = np.asarray(self.Lambda, dtype=float).reshape(p)
        mu_x = np.asarray(self.mu_x, dtype=float).reshape(p)
        mu_y = np.asarray(self.mu_y, dtype=float).reshape(q)
        alpha = (np.ones(p, dtype=bool) if self.alpha is None
                 else np.asarray(self.alpha).astype(bool).reshape(p))
        for name, arr in (("beta", beta), ("b", b), ("psi_tilde", psi_tilde),
                          ("B_load", B_load), ("Lambda", Lambda),
                          ("mu_x", mu_x), ("mu_y", mu_y)):
            if not np.all(np.isfinite(arr)):
                raise InvalidParameterError(f"non-finite entries in {name}")
        if np.any(psi_tilde <= 0):
            raise InvalidParameterError("psi_tilde entries must be positive")
        if np.any(Lambda <= 0):
            raise InvalidParameterError("Lambda entries must be positive")
        if np.any(beta[~alpha] != 0):
            raise InvalidParameterError("excluded predictors must have zero beta rows")
        for name, arr in (("beta", beta), ("b", b), ("psi_tilde", psi_tilde),
                          ("B_load", B_load), ("Lambda", Lambda), ("mu_x", mu_x),
                          ("mu_y", mu_y), ("alpha", alpha)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    @property
    def q(self) -> int:
        return self.beta.shape[1]

    @property
    def psi(self) -> np.ndarray:
        return np.outer(self.b, self.b) + np.diag(self.psi_tilde)

    @property
    def omega(self) -> np.ndarray:
        return omega_from_factor(self.b, self.psi_tilde)

    @property
    def sigma_x(self) -> np.ndarray:
        return self.B_load @ self.B_load.T + np.diag(self.Lambda)


@dataclass(frozen=True)
class PosteriorDraw(JointParams):
    """A retained Gibbs state; ``iteration`` is the sweep index it came from."""

    iteration: int = field(default=0)


def block_covariance(params: JointParams) -> np.ndarray:
    """Covariance of the stacked vector ``(Y, X)`` implied by ``params``.

    Returns the (q+p) x (q+p) matrix
    ``[[beta^T Sx beta + Psi, beta^T Sx], [Sx beta, Sx]]``.
    """
    beta = params.beta
    sx = params.sigma_x
    cross = sx @ beta
    top_left = beta.T @ cross + params.psi
    out = np.block([[top_left, cross.T], [cross, sx]])
    # exact symmetry, independent of summation order
    return 0.5 * (out + out.T)


def sample_predictive(params: JointParams, rng: np.random.Generator,
                      size: Optional[int] = None):
    """Draw a future ``(x_tilde, y_tilde)`` pair from the joint model.

    ``x_tilde ~ N(mu_x, Sigma_x)`` is simulated through the factor structure
    and ``y_tilde = mu_y + beta^T (x_tilde - mu_x) + eps`` with
    ``eps ~ N(0, b b^T + Psi_tilde)`` independent of ``x_tilde``.

    With ``size=None`` returns vectors of length p and q, otherwise arrays of
    shape (size, p) and (size, q).
    """
    n = 1 if size is None else int(size)
    p, q = params.p, params.q
    k = params.B_load.shape[1]
    fx = rng.standard_normal((n, k))
    vx = rng.standard_normal((n, p)) * np.sqrt(params.Lambda)
    xc = fx @ params.B_load.T + vx
    fy = rng.standard_normal(n)
    vy = rng.standard_normal((n, q)) * np.sqrt(params.psi_tilde)
    eps = np.outer(fy, params.b) + vy
    x = params.mu_x + xc
    y = params.mu_y + xc @ params.beta + eps
    if size is None:
        return x[0], y[0]
    return x, y
