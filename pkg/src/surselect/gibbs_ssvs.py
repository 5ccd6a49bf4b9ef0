"""Matrix-variate stochastic search variable selection for ``Y | X``.

A single inclusion vector ``alpha`` is shared by every response column.  The
Bayes factor of a model against the null model factorises over responses,
each term using a g-prior with its own local empirical-Bayes ``g``.  Residual
cross-correlation is carried by one latent factor, ``Psi = b b^T + Psi_tilde``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.special import logsumexp

from .exceptions import ConfigError, InvalidParameterError, SingularDesignError
from .factor_x import FactorConfig, gibbs_sweep_factor, init_factor_state
from .model_core import Dataset, PosteriorDraw

log = logging.getLogger(__name__)

G_CAP = 1.0e6
MODEL_PRIORS = ("uniform", "multiplicity_adjusted")

__all__ = [
    "SsvsConfig",
    "ResidualFactorPrior",
    "sse_pair",
    "empirical_bayes_g",
    "log_bayes_factor_univariate",
    "bayes_factor_univariate",
    "bayes_factor_matrix",
    "model_prior_log",
    "inclusion_probability",
    "gibbs_step_alpha",
    "sample_beta_sigma",
    "factor_score_conditional",
    "sample_residual_factor",
    "sample_alpha_chain",
    "enumerate_model_posterior",
    "run_chain",
]


@dataclass(frozen=True)
class ResidualFactorPrior:
    """Priors for the residual factor: ``b_j ~ N(0, b_var)`` and
    ``psi_tilde_j ~ InvGamma(shape, scale)``."""

    b_var: float = 1.0
    shape: float = 2.0
    scale: float = 1.0


@dataclass(frozen=True)
class SsvsConfig:
    n_iter: int = 5000
    burn_in: int = 1000
    thin: int = 1
    model_prior: str = "uniform"
    point_mass: bool = True
    seed: int = 0
    residual_prior: ResidualFactorPrior = field(default_factory=ResidualFactorPrior)

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigError("n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigError("need 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.model_prior not in MODEL_PRIORS:
            raise ConfigError(f"model_prior must be one of {MODEL_PRIORS}")


# ---------------------------------------------------------------------------
# Bayes-factor arithmetic
# ---------------------------------------------------------------------------

def _as_alpha(alpha, p) -> np.ndarray:
    a = np.asarray(alpha).astype(bool).reshape(-1)
    if a.size != p:
        raise InvalidParameterError(f"alpha has length {a.size}, expected {p}")
    return a


def _sse_columns(X: np.ndarray, Y: np.ndarray, alpha: np.ndarray):
    """Residual and total sums of squares for every column of ``Y`` regressed
    on ``X[:, alpha]``."""
    sse_null = np.einsum("ij,ij->j", Y, Y)
    k = int(alpha.sum())
    if k == 0:
        return sse_null.copy(), sse_null
    Xa = X[:, alpha]
    coef, _, rank, sv = np.linalg.lstsq(Xa, Y, rcond=None)
    if rank < k or sv[-1] <= sv[0] * 1e-12:
        raise SingularDesignError(f"X_alpha with {k} columns has rank {rank}")
    resid = Y - Xa @ coef
    sse = np.einsum("ij,ij->j", resid, resid)
    return np.minimum(sse, sse_null), sse_null


def sse_pair(dataset: Dataset, alpha, response_index: int) -> Tuple[float, float, float]:
    """SSE of response ``response_index`` on the predictors selected by
    ``alpha``, the null SSE, and the resulting R^2."""
    a = _as_alpha(alpha, dataset.p)
    if a.sum() >= dataset.N - 1:
        raise InvalidParameterError("need k_alpha < N - 1")
    y = dataset.Y[:, [response_index]]
    sse, sse0 = _sse_columns(dataset.X, y, a)
    sse, sse0 = float(sse[0]), float(sse0[0])
    r2 = 0.0 if sse0 == 0 else min(max(1.0 - sse / sse0, 0.0), 1.0)
    return sse, sse0, r2


def empirical_bayes_g(r_squared, k_alpha: int, N: int):
    """Local empirical-Bayes g: ``max(F - 1, 0)`` with F the regression
    F statistic.  Perfect fits are capped at ``G_CAP``."""
    r2 = np.asarray(r_squared, dtype=float)
    if k_alpha == 0:
        return np.zeros_like(r2)[()]
    if not 1 <= k_alpha <= N - 2:
        raise InvalidParameterError("need 1 <= k_alpha <= N - 2")
    with np.errstate(divide="ignore", invalid="ignore"):
        F = (r2 / k_alpha) / ((1.0 - r2) / (N - 1 - k_alpha))
    g = np.where(r2 >= 1.0, G_CAP, np.minimum(np.maximum(F - 1.0, 0.0), G_CAP))
    return g[()]


def log_bayes_factor_univariate(sse_alpha, sse_null, g, k_alpha: int, N: int):
    """Log Bayes factor of model ``alpha`` against the null for one response.

    ``(N-1-k)/2 log(1+g) - (N-1)/2 log(1 + g SSE_alpha / SSE_0)``; the
    ``N - 1`` accounts for the intercept removed by centring.
    """
    sse_alpha = np.asarray(sse_alpha, dtype=float)
    sse_null = np.asarray(sse_null, dtype=float)
    if np.any(sse_null <= 0):
        raise InvalidParameterError("sse_null must be positive")
    g = np.asarray(g, dtype=float)
    ratio = sse_alpha / sse_null
    out = 0.5 * (N - 1 - k_alpha) * np.log1p(g) - 0.5 * (N - 1) * np.log1p(g * ratio)
    return out[()]


def bayes_factor_univariate(sse_alpha, sse_null, g, k_alpha: int, N: int):
    return np.exp(log_bayes_factor_univariate(sse_alpha, sse_null, g, k_alpha, N))


def _log_bf_from_data(X, Y, alpha) -> float:
    k = int(alpha.sum())
    if k == 0:
        return 0.0
    N = X.shape[0]
    sse, sse0 = _sse_columns(X, Y, alpha)
    r2 = np.clip(1.0 - sse / sse0, 0.0, 1.0)
    g = empirical_bayes_g(r2, k, N)
    return float(np.sum(log_bayes_factor_univariate(sse, sse0, g, k, N)))


def bayes_factor_matrix(dataset: Dataset, alpha) -> float:
    """Log Bayes factor of ``alpha`` against the null model, summed over all
    response columns."""
    a = _as_alpha(alpha, dataset.p)
    return _log_bf_from_data(dataset.X, dataset.Y, a)


def model_prior_log(alpha, kind: str = "uniform") -> float:
    a = np.asarray(alpha).astype(bool)
    if kind == "uniform":
        return 0.0
    if kind == "multiplicity_adjusted":
        p, k = a.size, int(a.sum())
        return -math.log(p + 1) - math.log(math.comb(p, k))
    raise ConfigError(f"unknown model prior {kind!r}")


def inclusion_probability(log_bf_in, log_bf_out, log_prior_in=0.0, log_prior_out=0.0):
    """Conditional probability that a predictor is included, from the two
    competing models' log Bayes factors and log prior masses."""
    d = (log_bf_out + log_prior_out) - (log_bf_in + log_prior_in)
    # logistic of -d without overflow
    if d > 0:
        e = math.exp(-d)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(d))


class _LogBFCache:
    """Memoises log Bayes factors by model; singular models map to None."""

    def __init__(self, dataset: Dataset):
        self.X = dataset.X
        self.Y = dataset.Y
        self._store: Dict[bytes, Optional[float]] = {}

    def __call__(self, alpha: np.ndarray) -> Optional[float]:
        key = np.packbits(alpha).tobytes()
        if key not in self._store:
            try:
                self._store[key] = _log_bf_from_data(self.X, self.Y, alpha)
            except SingularDesignError:
                self._store[key] = None
        return self._store[key]


def gibbs_step_alpha(dataset: Dataset, alpha, i: int, config: SsvsConfig,
                     rng: np.random.Generator, cache: Optional[_LogBFCache] = None):
    """Resample component ``i`` of ``alpha`` from its full conditional.

    Returns a new array; the input is left untouched.  With
    ``config.point_mass`` false the indicator is pinned to all ones.
    """
    a = _as_alpha(alpha, dataset.p).copy()
    if not config.point_mass:
        return np.ones(dataset.p, dtype=bool)
    cache = cache or _LogBFCache(dataset)
    a_in = a.copy()
    a_in[i] = True
    a_out = a.copy()
    a_out[i] = False
    lb_in = cache(a_in)
    lb_out = cache(a_out)
    if lb_in is None and lb_out is None:
        log.warning("both candidate models singular at component %d; alpha unchanged", i)
        return a
    if lb_in is None:
        p_i = 0.0
    elif lb_out is None:
        p_i = 1.0
    else:
        p_i = inclusion_probability(lb_in, lb_out,
                                    model_prior_log(a_in, config.model_prior),
                                    model_prior_log(a_out, config.model_prior))
    a[i] = rng.random() < p_i
    return a


def sample_alpha_chain(dataset: Dataset, n_sweeps: int, config: SsvsConfig,
                       rng: np.random.Generator, alpha0=None) -> np.ndarray:
    """Run sequential-scan sweeps over ``alpha`` only; returns the state after
    each sweep as an (n_sweeps, p) boolean array."""
    p = dataset.p
    a = np.ones(p, dtype=bool) if alpha0 is None else _as_alpha(alpha0, p).copy()
    cache = _LogBFCache(dataset)
    out = np.empty((n_sweeps, p), dtype=bool)
    for s in range(n_sweeps):
        for i in range(p):
            a = gibbs_step_alpha(dataset, a, i, config, rng, cache)
        out[s] = a
    return out


def enumerate_model_posterior(dataset: Dataset, model_prior: str = "uniform"):
    """Exact posterior over all 2^p models (singular models get zero mass).

    Returns ``(models, probs)`` with ``models`` a (2^p, p) boolean array in
    binary-counting order.
    """
    p = dataset.p
    models = ((np.arange(2 ** p)[:, None] >> np.arange(p)) & 1).astype(bool)
    logw = np.full(len(models), -np.inf)
    for m, a in enumerate(models):
        try:
            logw[m] = bayes_factor_matrix(dataset, a) + model_prior_log(a, model_prior)
        except SingularDesignError:
            pass
    probs = np.exp(logw - logsumexp(logw))
    return models, probs


# ---------------------------------------------------------------------------
# Conditional draws of (beta, sigma) and of the residual factor
# ---------------------------------------------------------------------------

def sample_beta_sigma(dataset: Dataset, alpha, g_per_response, rng: np.random.Generator):
    """Draw ``(beta, sigma)`` from the g-prior posterior given ``alpha``.

    Per response, ``sigma^2 ~ InvGamma((N-1)/2, Q/2)`` with
    ``Q = y^T y - g/(1+g) y^T P_alpha y`` and then
    ``beta_alpha ~ N(g/(1+g) beta_LS, g/(1+g) sigma^2 (X_a^T X_a)^{-1})``.
    Rows of ``beta`` outside the model are exactly zero.
    """
    X, Y = dataset.X, dataset.Y
    N, p, q = dataset.N, dataset.p, dataset.q
    a = _as_alpha(alpha, p)
    g = np.broadcast_to(np.asarray(g_per_response, dtype=float), (q,))
    shrink = g / (1.0 + g)
    yy = np.einsum("ij,ij->j", Y, Y)
    beta = np.zeros((p, q))
    k = int(a.sum())
    if k == 0:
        Qf = yy
    else:
        Xa = X[:, a]
        try:
            c, low = cho_factor(Xa.T @ Xa, lower=True)
        except LinAlgError as exc:
            raise SingularDesignError(str(exc)) from exc
        XtY = Xa.T @ Y
        bhat = cho_solve((c, low), XtY)
        Qf = yy - shrink * np.einsum("ij,ij->j", XtY, bhat)
    Qf = np.maximum(Qf, 1e-300)
    sigma2 = 0.5 * Qf / rng.gamma(0.5 * (N - 1), 1.0, size=q)
    if k > 0:
        z = rng.standard_normal((k, q))
        # (X_a^T X_a)^{-1} = C^{-T} C^{-1}, so C^{-T} z has that covariance
        noise = solve_triangular(c, z, lower=True, trans="T")
        beta[a] = shrink * bhat + noise * np.sqrt(shrink * sigma2)
    return beta, np.sqrt(sigma2)


def factor_score_conditional(e, b, psi_tilde):
    """Mean(s) and variance of ``f_t | e_t`` for ``e_t = b f_t + noise``,
    ``f_t ~ N(0, 1)``, ``noise ~ N(0, diag(psi_tilde))``."""
    b = np.asarray(b, dtype=float)
    w = b / np.asarray(psi_tilde, dtype=float)
    v = 1.0 / (1.0 + b @ w)
    return v * (np.asarray(e, dtype=float) @ w), v


def sample_residual_factor(residuals, b, psi_tilde, rng: np.random.Generator,
                           prior: ResidualFactorPrior = ResidualFactorPrior()):
    """One Gibbs pass over the residual latent factor.

    Draws the scores ``f`` (length N), then each loading ``b_j`` and variance
    ``psi_tilde_j`` from their conjugate conditionals with ``f`` treated as a
    regressor.
    """
    E = np.atleast_2d(np.asarray(residuals, dtype=float))
    psi_tilde = np.asarray(psi_tilde, dtype=float)
    if np.any(psi_tilde <= 0) or not np.all(np.isfinite(psi_tilde)):
        raise InvalidParameterError("psi_tilde entries must be positive")
    N, q = E.shape
    mean, v = factor_score_conditional(E, b, psi_tilde)
    f = mean + math.sqrt(v) * rng.standard_normal(N)

    ff = f @ f
    fe = f @ E
    prec = ff / psi_tilde + 1.0 / prior.b_var
    b_new = fe / psi_tilde / prec + rng.standard_normal(q) / np.sqrt(prec)
    resid = E - np.outer(f, b_new)
    ss = np.einsum("ij,ij->j", resid, resid)
    shape = prior.shape + 0.5 * N
    scale = prior.scale + 0.5 * ss
    psi_new = scale / rng.gamma(shape, 1.0, size=q)
    return f, b_new, psi_new


# ---------------------------------------------------------------------------
# Full chain
# ---------------------------------------------------------------------------

def _g_for_model(dataset: Dataset, alpha: np.ndarray) -> np.ndarray:
    k = int(alpha.sum())
    if k == 0:
        return np.zeros(dataset.q)
    sse, sse0 = _sse_columns(dataset.X, dataset.Y, alpha)
    r2 = np.clip(1.0 - sse / sse0, 0.0, 1.0)
    return np.asarray(empirical_bayes_g(r2, k, dataset.N), dtype=float)


def _init_residual_factor(E: np.ndarray):
    q = E.shape[1]
    cov = np.atleast_2d(np.cov(E, rowvar=False))
    w, V = np.linalg.eigh(cov)
    b = 0.5 * math.sqrt(max(w[-1], 1e-12)) * V[:, -1]
    psi = np.maximum(np.diag(cov) - b ** 2, 1e-3 * max(np.trace(cov) / q, 1e-12))
    return b, psi


def run_chain(dataset: Dataset, config: SsvsConfig,
              factor_config: Optional[FactorConfig] = None) -> List[PosteriorDraw]:
    """Run the joint Gibbs sampler and return the retained draws.

    Each iteration sweeps ``alpha`` (skipped under the alternative prior),
    draws ``(beta, sigma)``, updates the residual factor, takes one sweep of
    the predictor factor model, and draws ``mu_y`` given the rest.
    """
    factor_config = factor_config or FactorConfig()
    rng = np.random.default_rng(config.seed)
    X, Y = dataset.X, dataset.Y
    N, p, q = dataset.N, dataset.p, dataset.q

    alpha = np.ones(p, dtype=bool)
    cache = _LogBFCache(dataset)
    if config.point_mass and cache(alpha) is None:
        alpha = np.zeros(p, dtype=bool)
    g0 = _g_for_model(dataset, alpha)
    beta, _ = sample_beta_sigma(dataset, alpha, g0, rng)
    b, psi_tilde = _init_residual_factor(Y - X @ beta)
    fstate = init_factor_state(X, factor_config)

    draws: List[PosteriorDraw] = []
    for it in range(config.n_iter):
        try:
            if config.point_mass:
                for i in range(p):
                    alpha = gibbs_step_alpha(dataset, alpha, i, config, rng, cache)
            g = _g_for_model(dataset, alpha)
            beta, _ = sample_beta_sigma(dataset, alpha, g, rng)
            _, b, psi_tilde = sample_residual_factor(Y - X @ beta, b, psi_tilde, rng,
                                                     config.residual_prior)
            fstate = gibbs_sweep_factor(X, fstate, factor_config, rng)
        except (SingularDesignError, InvalidParameterError, LinAlgError) as exc:
            raise RuntimeError(f"Gibbs sweep {it} failed: {exc}") from exc

        mu_x = dataset.x_mean + fstate.mu_x
        psi_chol = np.linalg.cholesky(np.outer(b, b) + np.diag(psi_tilde))
        mu_y = (dataset.y_mean - beta.T @ (dataset.x_mean - mu_x)
                + psi_chol @ rng.standard_normal(q) / math.sqrt(N))

        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            draws.append(PosteriorDraw(
                beta=beta, b=b, psi_tilde=psi_tilde, B_load=fstate.B_load,
                Lambda=fstate.Lambda, mu_x=mu_x, mu_y=mu_y, alpha=alpha,
                iteration=it))
    return draws


def inclusion_frequencies(draws) -> np.ndarray:
    return np.mean([d.alpha for d in draws], axis=0)

