import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from surselect.exceptions import InvalidParameterError
from surselect.model_core import (Dataset, JointParams, block_covariance,
                                  omega_from_factor, sample_predictive)

from oracles import random_spd


def make_params(rng, p=3, q=2, k=2, **kw):
    base = dict(beta=rng.standard_normal((p, q)), b=rng.standard_normal(q),
                psi_tilde=rng.uniform(0.2, 1.0, q), B_load=rng.standard_normal((p, k)),
                Lambda=rng.uniform(0.2, 1.0, p), mu_x=rng.standard_normal(p),
                mu_y=rng.standard_normal(q))
    base.update(kw)
    return JointParams(**base)


def test_zero_beta_is_block_diagonal():
    rng = np.random.default_rng(0)
    prm = make_params(rng, beta=np.zeros((3, 2)))
    out = block_covariance(prm)
    assert np.all(out[:2, 2:] == 0) and np.all(out[2:, :2] == 0)
    np.testing.assert_allclose(out[:2, :2], prm.psi)
    np.testing.assert_allclose(out[2:, 2:], prm.sigma_x)


def test_scalar_block_covariance():
    # beta = 2, Sigma_x = 1, Psi = 3
    prm = JointParams(beta=[[2.0]], b=[1.0], psi_tilde=[2.0], B_load=np.zeros((1, 0)),
                      Lambda=[1.0], mu_x=[0.0], mu_y=[0.0])
    np.testing.assert_allclose(block_covariance(prm), [[7.0, 2.0], [2.0, 1.0]])


def test_block_covariance_monte_carlo():
    rng = np.random.default_rng(1)
    p, q = 3, 2
    beta = rng.standard_normal((p, q))
    sx = random_spd(rng, p, cond=5)
    Bl = np.linalg.cholesky(sx - 0.1 * np.eye(p))
    prm = JointParams(beta=beta, b=rng.standard_normal(q), psi_tilde=rng.uniform(0.2, 1, q),
                      B_load=Bl, Lambda=np.full(p, 0.1), mu_x=np.zeros(p), mu_y=np.zeros(q))
    target = block_covariance(prm)
    assert np.linalg.eigvalsh(target).min() > 0
    # independent simulation straight from the joint normal definition
    n = 1_000_000
    X = rng.multivariate_normal(np.zeros(p), prm.sigma_x, size=n)
    E = rng.multivariate_normal(np.zeros(q), prm.psi, size=n)
    Y = X @ beta + E
    emp = np.cov(np.hstack([Y, X]), rowvar=False)
    d = np.diag(target)
    se = np.sqrt((np.outer(d, d) + target ** 2) / n)
    assert np.all(np.abs(emp - target) < 5 * se)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 3), st.integers(0, 2 ** 31))
def test_block_covariance_properties(p, q, k, seed):
    rng = np.random.default_rng(seed)
    prm = make_params(rng, p=p, q=q, k=k)
    out = block_covariance(prm)
    assert np.array_equal(out, out.T)
    assert np.linalg.eigvalsh(out).min() > 0
    bsb = prm.beta.T @ prm.sigma_x @ prm.beta
    np.testing.assert_allclose(out[:q, :q] - prm.psi, bsb, atol=1e-10 * (1 + np.abs(bsb).max()))


def test_invalid_params():
    rng = np.random.default_rng(2)
    with pytest.raises(InvalidParameterError):
        make_params(rng, psi_tilde=np.array([1.0, -1.0]))
    with pytest.raises(InvalidParameterError):
        make_params(rng, beta=np.full((3, 2), np.nan))
    with pytest.raises(InvalidParameterError):
        make_params(rng, alpha=np.array([0, 1, 1]))


def test_omega_rank_one_inverse():
    rng = np.random.default_rng(3)
    b = rng.standard_normal(4)
    d = rng.uniform(0.1, 2, 4)
    np.testing.assert_allclose(omega_from_factor(b, d) @ (np.outer(b, b) + np.diag(d)),
                               np.eye(4), atol=1e-12)


def test_predictive_degenerate_noise():
    p = 3
    prm = JointParams(beta=np.eye(p), b=np.zeros(p), psi_tilde=np.full(p, 1e-300),
                      B_load=np.ones((p, 1)), Lambda=np.ones(p), mu_x=np.arange(p),
                      mu_y=-np.arange(p))
    x, y = sample_predictive(prm, np.random.default_rng(0))
    np.testing.assert_allclose(y - prm.mu_y, x - prm.mu_x, rtol=0, atol=1e-12)


def test_predictive_moments():
    rng = np.random.default_rng(4)
    prm = make_params(rng)
    x, y = sample_predictive(prm, np.random.default_rng(5), size=100_000)
    se = np.sqrt(np.diag(prm.sigma_x) / x.shape[0])
    assert np.all(np.abs(x.mean(axis=0) - prm.mu_x) < 4 * se)

    x, y = sample_predictive(prm, np.random.default_rng(6), size=1_000_000)
    full = block_covariance(prm)
    q = prm.q
    cyx = (y - y.mean(0)).T @ (x - x.mean(0)) / (x.shape[0] - 1)
    target = prm.beta.T @ prm.sigma_x
    se = np.sqrt((np.outer(np.diag(full)[:q], np.diag(full)[q:]) + target ** 2) / x.shape[0])
    assert np.all(np.abs(cyx - target) < 5 * se)
    assert np.allclose(target, full[:q, q:])


def test_predictive_determinism():
    prm = make_params(np.random.default_rng(7))
    a = sample_predictive(prm, np.random.default_rng(1), size=10)
    b = sample_predictive(prm, np.random.default_rng(1), size=10)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_dataset_checks():
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidParameterError):
        Dataset.from_arrays(rng.standard_normal((4, 2)), rng.standard_normal((4, 3)))
    Y = rng.standard_normal((10, 2))
    Y[3, 1] = np.nan
    with pytest.raises(InvalidParameterError):
        Dataset.from_arrays(Y, rng.standard_normal((10, 2)))
    ds = Dataset.from_arrays(rng.standard_normal((10, 2)) + 5, rng.standard_normal((10, 3)))
    np.testing.assert_allclose(ds.Y.mean(0), 0, atol=1e-12)
    assert np.all(ds.y_mean > 3)
