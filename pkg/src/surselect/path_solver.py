"""Lasso path for ``min_v ||D v - t||^2 + lam ||v||_1``.

Note the objective has no 1/2 on the squared error, so the zero solution is
optimal for ``lam >= 2 max|D^T t|`` and the KKT conditions read
``2 D_j^T (D v - t) + lam sign(v_j) = 0`` on the support and
``|2 D_j^T (D v - t)| <= lam`` off it.

Cyclic coordinate descent on the Gram matrix, with an active-set polish: once
the support and signs settle, the restricted stationarity system is solved
directly and accepted if it passes the KKT check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .dss_summary import LassoProblem
from .exceptions import ConvergenceError, DegenerateGridError, InvalidParameterError

__all__ = ["SummaryPath", "lambda_max", "lambda_grid", "lasso_objective",
           "kkt_violation", "solve_lasso", "solve_path"]

KKT_TOL = 1e-6


@dataclass(frozen=True)
class SummaryPath:
    lambdas: np.ndarray
    gammas: Tuple[np.ndarray, ...]
    gamma_star: np.ndarray
    support_sets: Tuple[frozenset, ...]
    objectives: np.ndarray

    def __len__(self):
        return len(self.lambdas)

    @property
    def support_sizes(self) -> np.ndarray:
        return np.array([len(s) for s in self.support_sets])


def lambda_max(problem: LassoProblem) -> float:
    return float(2.0 * np.max(np.abs(problem.design.T @ problem.target)))


def lambda_grid(problem: LassoProblem, G: int = 50, ratio: float = 1e-3) -> np.ndarray:
    """``G`` log-spaced values from ``lambda_max`` down to ``ratio*lambda_max``
    followed by a final 0."""
    if G < 2:
        raise InvalidParameterError("grid size must be at least 2")
    if not 0.0 < ratio < 1.0:
        raise InvalidParameterError("ratio must lie in (0, 1)")
    lmax = lambda_max(problem)
    if lmax == 0.0:
        raise DegenerateGridError("target is orthogonal to the design; the whole path is zero")
    grid = np.geomspace(lmax, ratio * lmax, G)
    return np.append(grid, 0.0)


def lasso_objective(problem: LassoProblem, v, lam: float) -> float:
    r = problem.design @ v - problem.target
    return float(r @ r + lam * np.sum(np.abs(v)))


def kkt_violation(problem: LassoProblem, v, lam: float) -> float:
    """Largest violation of the lasso optimality conditions at ``v``."""
    g = 2.0 * problem.design.T @ (problem.design @ v - problem.target)
    nz = v != 0
    viol_nz = np.abs(g[nz] + lam * np.sign(v[nz]))
    viol_z = np.maximum(np.abs(g[~nz]) - lam, 0.0)
    return float(max(viol_nz.max(initial=0.0), viol_z.max(initial=0.0)))


def _polish(H, c, v, lam):
    """Solve the stationarity system on the current support with the current
    signs; returns None when the signs flip."""
    act = np.flatnonzero(v)
    out = np.zeros_like(v)
    if act.size == 0:
        return out
    s = np.sign(v[act])
    try:
        va = np.linalg.solve(H[np.ix_(act, act)], c[act] - 0.5 * lam * s)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.sign(va) != s):
        return None
    out[act] = va
    return out


def solve_lasso(problem: LassoProblem, lam: float, warm_start=None,
                max_sweeps: int = 10_000, tol: float = 1e-9,
                kkt_tol: float = KKT_TOL) -> np.ndarray:
    """Minimise ``||D v - t||^2 + lam ||v||_1`` by cyclic coordinate descent."""
    if lam < 0:
        raise InvalidParameterError("lambda must be nonnegative")
    D, t = problem.design, problem.target
    H = D.T @ D
    c = D.T @ t
    return _cd(H, c, lam, warm_start, max_sweeps, tol, kkt_tol,
               lambda v: kkt_violation(problem, v, lam))


def _cd(H, c, lam, warm_start, max_sweeps, tol, kkt_tol, kkt):
    n = c.size
    v = np.zeros(n) if warm_start is None else np.array(warm_start, dtype=float)
    diag = np.diag(H).copy()
    if np.any(diag <= 0):
        raise InvalidParameterError("design has a zero column")
    Hv = H @ v
    half = 0.5 * lam
    last_support = None
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(n):
            rho = c[j] - Hv[j] + diag[j] * v[j]
            if rho > half:
                new = (rho - half) / diag[j]
            elif rho < -half:
                new = (rho + half) / diag[j]
            else:
                new = 0.0
            delta = new - v[j]
            if delta != 0.0:
                Hv += delta * H[:, j]
                v[j] = new
                max_delta = max(max_delta, abs(delta))
        support = tuple(np.sign(v).astype(int))
        if support == last_support or max_delta < tol * (1.0 + np.max(np.abs(v))):
            cand = _polish(H, c, v, lam)
            if cand is not None and kkt(cand) <= kkt_tol:
                return cand
            if max_delta < tol * (1.0 + np.max(np.abs(v))) and kkt(v) <= kkt_tol:
                return v
        last_support = support
        # periodic refresh against drift in the running product
        if sweep % 50 == 49:
            Hv = H @ v
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_sweeps} sweeps",
        residual=kkt(v))


def solve_path(problem: LassoProblem, grid) -> SummaryPath:
    """Solve along a decreasing grid with warm starts.  The solution at
    ``lambda = 0`` (solved separately if absent from the grid) is
    ``gamma_star``."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) > 0):
        raise InvalidParameterError("grid must be decreasing")
    v = None
    gammas: List[np.ndarray] = []
    supports = []
    objs = []
    for lam in grid:
        v = solve_lasso(problem, lam, warm_start=v)
        g = problem.to_gamma(v)
        gammas.append(g)
        supports.append(frozenset(problem.column_map[k] for k in np.flatnonzero(v)))
        objs.append(lasso_objective(problem, v, lam))
    if grid.size and grid[-1] == 0.0:
        gamma_star = gammas[-1]
    else:
        gamma_star = problem.to_gamma(solve_lasso(problem, 0.0, warm_start=v))
    return SummaryPath(grid, tuple(gammas), gamma_star, tuple(supports), np.array(objs))
