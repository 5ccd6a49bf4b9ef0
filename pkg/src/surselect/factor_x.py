"""Gaussian latent factor model for the predictors,
``x_t = mu_x + B f_t + v_t`` with ``v_t ~ N(0, Lambda)``, ``f_t ~ N(0, I_k)``.

Only ``Sigma_x = B B^T + Lambda`` and ``mu_x`` are used downstream, so the
loadings carry no identification constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .exceptions import ConfigError

__all__ = ["FactorConfig", "FactorState", "init_factor_state",
           "gibbs_sweep_factor", "sigma_x_of"]


@dataclass(frozen=True)
class FactorConfig:
    k: int = 3
    prior_scale_loadings: float = 1.0
    prior_shape_idio: float = 2.0
    prior_scale_idio: float = 1.0
    prior_var_mu: float = 100.0

    def __post_init__(self):
        if self.k < 0:
            raise ConfigError("k must be nonnegative")
        for name in ("prior_scale_loadings", "prior_shape_idio",
                     "prior_scale_idio", "prior_var_mu"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass(frozen=True)
class FactorState:
    B_load: np.ndarray   # (p, k)
    Lambda: np.ndarray   # (p,)
    mu_x: np.ndarray     # (p,)
    scores: np.ndarray   # (N, k)


def sigma_x_of(state) -> np.ndarray:
    B = state.B_load
    return B @ B.T + np.diag(state.Lambda)


def init_factor_state(X, config: FactorConfig) -> FactorState:
    """Deterministic start from the leading principal components of ``X``."""
    X = np.asarray(X, dtype=float)
    N, p = X.shape
    k = config.k
    if k > p:
        raise ConfigError(f"k={k} exceeds the number of predictors p={p}")
    mu = X.mean(axis=0)
    Xc = X - mu
    cov = Xc.T @ Xc / N
    w, V = np.linalg.eigh(cov)
    idx = np.argsort(w)[::-1][:k]
    B = V[:, idx] * np.sqrt(np.maximum(0.5 * w[idx], 0.0))
    floor = 1e-3 * max(np.trace(cov) / p, 1e-12)
    Lam = np.maximum(np.diag(cov) - np.sum(B ** 2, axis=1), floor)
    return FactorState(B, Lam, mu, np.zeros((N, k)))


def gibbs_sweep_factor(X, state: FactorState, config: FactorConfig,
                       rng: np.random.Generator) -> FactorState:
    """One conjugate sweep: scores, loadings, idiosyncratic variances, mean."""
    X = np.asarray(X, dtype=float)
    N, p = X.shape
    k = config.k
    if k > p:
        raise ConfigError(f"k={k} exceeds the number of predictors p={p}")
    B, Lam, mu = state.B_load, state.Lambda, state.mu_x
    Xc = X - mu

    # scores: f_t | . ~ N(V B^T Lam^-1 (x_t - mu), V), V = (I + B^T Lam^-1 B)^-1
    if k > 0:
        BL = B / Lam[:, None]
        c, low = cho_factor(np.eye(k) + B.T @ BL, lower=True)
        F = cho_solve((c, low), (Xc @ BL).T).T
        F += solve_triangular(c, rng.standard_normal((k, N)), lower=True, trans="T").T
    else:
        F = np.zeros((N, 0))

    # loadings, row by row
    tau = 1.0 / config.prior_scale_loadings ** 2
    B_new = np.zeros((p, k))
    if k > 0:
        FtF = F.T @ F
        FtX = F.T @ Xc
        Zb = rng.standard_normal((p, k))
        for j in range(p):
            c, low = cho_factor(FtF / Lam[j] + tau * np.eye(k), lower=True)
            m = cho_solve((c, low), FtX[:, j] / Lam[j])
            B_new[j] = m + solve_triangular(c, Zb[j], lower=True, trans="T")

    # idiosyncratic variances
    R = Xc - F @ B_new.T
    ss = np.einsum("ij,ij->j", R, R)
    shape = config.prior_shape_idio + 0.5 * N
    scale = config.prior_scale_idio + 0.5 * ss
    Lam_new = scale / rng.gamma(shape, 1.0, size=p)

    # mean: prior N(0, prior_var_mu I)
    D = X - F @ B_new.T
    prec = N / Lam_new + 1.0 / config.prior_var_mu
    m = (D.sum(axis=0) / Lam_new) / prec
    mu_new = m + rng.standard_normal(p) / np.sqrt(prec)

    return FactorState(B_new, Lam_new, mu_new, F)
