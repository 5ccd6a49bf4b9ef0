"""Synthetic data with a known sparse coefficient pattern."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .exceptions import InvalidParameterError
from .model_core import Dataset

__all__ = ["GroundTruth", "generate_synthetic"]


@dataclass(frozen=True)
class GroundTruth:
    beta: np.ndarray        # (p, q)
    b: np.ndarray           # (q,)
    psi_tilde: np.ndarray   # (q,)
    B_load: np.ndarray      # (p, k)
    Lambda: np.ndarray      # (p,)
    seed: int

    @property
    def support(self) -> frozenset:
        """Nonzero links as ``(response, predictor)`` pairs."""
        i, j = np.nonzero(self.beta)
        return frozenset(zip(j.tolist(), i.tolist()))

    @property
    def active_predictors(self) -> np.ndarray:
        return np.flatnonzero(np.any(self.beta != 0, axis=1))

    @property
    def psi(self) -> np.ndarray:
        return np.outer(self.b, self.b) + np.diag(self.psi_tilde)

    @property
    def sigma_x(self) -> np.ndarray:
        return self.B_load @ self.B_load.T + np.diag(self.Lambda)


def generate_synthetic(N: int = 500, q: int = 5, p: int = 10,
                       true_support: Union[Iterable[int], np.ndarray] = (0, 1, 2),
                       signal: float = 1.0, noise: float = 0.5, k_x: int = 2,
                       x_loading_scale: float = 0.5, x_idio: float = 1.0,
                       seed: int = 0, b=None, psi_tilde=None,
                       beta: Optional[np.ndarray] = None):
    """Draw ``X`` from a ``k_x``-factor model and ``Y = X beta + E`` with
    ``E ~ N(0, b b^T + diag(psi_tilde))``.  Predictor loadings are
    ``N(0, x_loading_scale^2)`` and idiosyncratic variances ``x_idio``.

    ``true_support`` is either a list of predictor indices (linked to every
    response) or a (p, q) boolean mask.  Active coefficients have magnitude
    ``signal * U(0.5, 1.5)`` and random sign unless ``beta`` is given.
    The residual defaults to ``b = noise * U(0.5, 1)``, ``psi_tilde = noise^2``.
    """
    rng = np.random.default_rng(seed)
    mask = np.zeros((p, q), dtype=bool)
    ts = np.asarray(true_support if not isinstance(true_support, np.ndarray)
                    else true_support)
    if ts.dtype == bool and ts.shape == (p, q):
        mask = ts.copy()
    else:
        idx = np.asarray(list(ts), dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= p):
            raise InvalidParameterError("true support outside predictor range")
        mask[idx] = True

    B_load = rng.normal(0.0, x_loading_scale, size=(p, k_x))
    Lambda = np.full(p, float(x_idio))
    F = rng.standard_normal((N, k_x))
    X = F @ B_load.T + rng.standard_normal((N, p)) * np.sqrt(Lambda)

    if beta is None:
        mag = signal * rng.uniform(0.5, 1.5, size=(p, q))
        sign = rng.choice([-1.0, 1.0], size=(p, q))
        beta = np.where(mask, mag * sign, 0.0)
    else:
        beta = np.asarray(beta, dtype=float).reshape(p, q)
    b = noise * rng.uniform(0.5, 1.0, size=q) if b is None else np.asarray(b, float)
    psi_tilde = (np.full(q, noise ** 2) if psi_tilde is None
                 else np.asarray(psi_tilde, float))
    E = (np.outer(rng.standard_normal(N), b)
         + rng.standard_normal((N, q)) * np.sqrt(psi_tilde))
    Y = X @ beta + E

    data = Dataset.from_arrays(Y, X, [f"y{j + 1}" for j in range(q)],
                               [f"x{i + 1}" for i in range(p)])
    return data, GroundTruth(beta, b, psi_tilde, B_load, Lambda, seed)
