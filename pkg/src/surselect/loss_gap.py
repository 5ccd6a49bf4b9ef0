"""Posterior distribution of the loss gap between sparse summaries and the
saturated one, and threshold-based model selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import InvalidParameterError
from .model_core import omega_from_factor, sample_predictive
from .path_solver import SummaryPath

__all__ = ["LossGapResult", "SelectedModel", "loss_at", "delta_samples",
           "select_model"]


@dataclass(frozen=True)
class LossGapResult:
    lambdas: np.ndarray
    delta_samples: np.ndarray     # (G, R)
    delta_mean: np.ndarray        # (G,)
    delta_quantiles: np.ndarray   # (G, 2) lower/upper band
    pi: np.ndarray                # (G,)
    mode: str
    band: float = 0.75

    @property
    def delta_sd(self) -> np.ndarray:
        return self.delta_samples.std(axis=1, ddof=1)

    @property
    def delta_se(self) -> np.ndarray:
        return self.delta_sd / math.sqrt(self.delta_samples.shape[1])


@dataclass(frozen=True)
class SelectedModel:
    index: int
    lambda_: float
    gamma: np.ndarray
    support: frozenset
    fallback: bool = False


def loss_at(y, x, omega, gamma) -> float:
    """``0.5 (y - gamma x)^T Omega (y - gamma x)``."""
    r = np.asarray(y, dtype=float) - np.asarray(gamma, dtype=float) @ np.asarray(x, dtype=float)
    return float(0.5 * r @ np.asarray(omega, dtype=float) @ r)


def _summarise(lambdas, gammas, gamma_star, samples, mode, band):
    lo, hi = 0.5 * (1.0 - band), 0.5 * (1.0 + band)
    mean = np.array([math.fsum(row) / row.size for row in samples])
    quant = np.quantile(samples, [lo, hi], axis=1).T
    pi = np.mean(samples < 0.0, axis=1)
    for g, gam in enumerate(gammas):
        if np.array_equal(gam, gamma_star):
            pi[g] = 1.0
    return LossGapResult(np.asarray(lambdas, dtype=float), samples, mean, quant,
                         pi, mode, band)


_CHUNK = 256


def _random_gap(draw, om, dgam, gstar, n, rng):
    x, y = sample_predictive(draw, rng, size=n)
    xc = x - draw.mu_x
    r_star = (y - draw.mu_y) - xc @ gstar.T           # (n, q)
    u = np.einsum("gqp,np->gnq", dgam, xc)            # (G, n, q)
    # loss(gamma_l) - loss(gamma*) = r*^T Om u + 0.5 u^T Om u
    uo = u @ om
    return np.einsum("gnq,nq->gn", uo, r_star) + 0.5 * np.einsum("gnq,gnq->gn", uo, u)


def _fixed_gap(draw, om, dgam, gstar, X, XtX, n, rng):
    N = X.shape[0]
    chol = np.linalg.cholesky(draw.psi)
    E = rng.standard_normal((n, N, draw.q)) @ chol.T          # (n, N, q)
    XtY = XtX @ draw.beta + np.einsum("ip,niq->npq", X, E)   # (n, p, q)
    XtR = XtY - (XtX @ gstar.T)[None]                       # X^T (Y - X gamma*^T)
    # 0.5 tr[Om (R* + X dg^T)^T (R* + X dg^T)] - 0.5 tr[Om R*^T R*]
    cross = np.einsum("gqp,npr,rq->gn", dgam, XtR, om)
    quad = np.einsum("gqp,ps,gts,tq->g", dgam, XtX, dgam, om)
    return (cross + 0.5 * quad[:, None]) / N


def delta_samples(path: SummaryPath, draws: Sequence, R: int = 10_000,
                  mode: str = "random", X_observed: Optional[np.ndarray] = None,
                  rng: Optional[np.random.Generator] = None,
                  band: float = 0.75) -> LossGapResult:
    """Monte Carlo draws of the loss gap at every grid value.

    Each replicate picks a posterior draw uniformly with replacement and a
    future observation from it; the same replicate is reused for every
    ``lambda``.  Random mode simulates ``(x, y)`` (centred at the draw's
    means).  Fixed mode simulates a full ``N x q`` response matrix at
    ``X_observed`` and divides the trace-form loss by ``N``.
    """
    if len(draws) == 0:
        raise InvalidParameterError("no posterior draws")
    if mode not in ("random", "fixed"):
        raise InvalidParameterError("mode must be 'random' or 'fixed'")
    if not 0.0 < band < 1.0:
        raise InvalidParameterError("band must lie in (0, 1)")
    if mode == "fixed" and X_observed is None:
        raise InvalidParameterError("fixed mode needs X_observed")
    rng = rng if rng is not None else np.random.default_rng()
    G = len(path.lambdas)
    gstar = path.gamma_star
    # differences gamma_star - gamma_lambda, shape (G, q, p)
    dgam = np.stack([gstar - g for g in path.gammas])

    picks = rng.integers(len(draws), size=R)
    out = np.empty((G, R))
    X = XtX = None
    if mode == "fixed":
        X = np.asarray(X_observed, dtype=float)
        XtX = X.T @ X
    for d in np.unique(picks):
        draw = draws[d]
        om = omega_from_factor(draw.b, draw.psi_tilde)
        all_rows = np.flatnonzero(picks == d)
        for start in range(0, all_rows.size, _CHUNK):
            rows = all_rows[start:start + _CHUNK]
            if mode == "random":
                out[:, rows] = _random_gap(draw, om, dgam, gstar, rows.size, rng)
            else:
                out[:, rows] = _fixed_gap(draw, om, dgam, gstar, X, XtX, rows.size, rng)
    return _summarise(path.lambdas, path.gammas, gstar, out, mode, band)


def select_model(result: LossGapResult, path: SummaryPath, kappa: float) -> SelectedModel:
    """Sparsest grid entry (largest lambda) whose ``pi`` exceeds ``kappa``.

    If none qualifies the densest entry is returned with ``fallback=True``.
    """
    if len(result.lambdas) != len(path.lambdas) or not np.allclose(result.lambdas, path.lambdas):
        raise InvalidParameterError("result and path are on different grids")
    order = np.argsort(-path.lambdas, kind="stable")
    for g in order:
        if result.pi[g] > kappa:
            return SelectedModel(int(g), float(path.lambdas[g]), path.gammas[g],
                                 path.support_sets[g])
    g = int(order[-1])
    return SelectedModel(g, float(path.lambdas[g]), path.gammas[g],
                         path.support_sets[g], fallback=True)
