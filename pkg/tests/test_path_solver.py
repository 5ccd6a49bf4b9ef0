import numpy as np
import pytest

from surselect.dss_summary import (LassoProblem, MomentSet, build_lasso_problem,
                                   unpenalized_summary)
from surselect.exceptions import ConvergenceError, DegenerateGridError, InvalidParameterError
from surselect.path_solver import (kkt_violation, lambda_grid, lambda_max, lasso_objective,
                                   solve_lasso, solve_path)

from oracles import lasso_enumeration, random_moments, soft_threshold


def identity_problem(t):
    t = np.asarray(t, float)
    n = t.size
    return LassoProblem(np.eye(n), t, n, 1, tuple((0, i) for i in range(n)))


def random_problem(seed, q=3, p=4):
    rng = np.random.default_rng(seed)
    m = MomentSet.from_matrices(*random_moments(rng, q, p))
    return m, build_lasso_problem(m)


def test_lambda_max_example():
    assert lambda_max(identity_problem([3.0, -4.0])) == 8.0


def test_grid_endpoints():
    prob = identity_problem([3.0, -4.0])
    np.testing.assert_allclose(lambda_grid(prob, G=2, ratio=0.01), [8.0, 0.08, 0.0])
    grid = lambda_grid(prob, G=50)
    assert grid.size == 51 and grid[-1] == 0.0
    assert np.all(np.diff(grid) < 0)
    with pytest.raises(DegenerateGridError):
        lambda_grid(identity_problem([0.0, 0.0]))
    with pytest.raises(InvalidParameterError):
        lambda_grid(prob, G=1)


def test_first_grid_value_is_zero_solution():
    for seed in range(5):
        _, prob = random_problem(seed)
        v = solve_lasso(prob, lambda_grid(prob)[0])
        assert np.all(v == 0)


def test_soft_threshold_oracle():
    rng = np.random.default_rng(11)
    t = rng.standard_normal(8) * 3
    for lam in (0.0, 0.5, 2.0, 10.0):
        v = solve_lasso(identity_problem(t), lam)
        np.testing.assert_allclose(v, soft_threshold(t, lam / 2), atol=1e-12, rtol=0)


def test_zero_lambda_is_unpenalized_summary():
    for seed in range(5):
        m, prob = random_problem(seed)
        v = solve_lasso(prob, 0.0)
        np.testing.assert_allclose(prob.to_gamma(v), unpenalized_summary(m), atol=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_enumeration_oracle(seed):
    _, prob = random_problem(100 + seed, q=2, p=3)
    lam = lambda_max(prob) / 10
    v = solve_lasso(prob, lam)
    _, best = lasso_enumeration(prob.design, prob.target, lam)
    assert lasso_objective(prob, v, lam) == pytest.approx(best, rel=1e-8)


def test_kkt_along_path():
    _, prob = random_problem(12, q=3, p=5)
    path = solve_path(prob, lambda_grid(prob, 50))
    for lam, g in zip(path.lambdas, path.gammas):
        assert kkt_violation(prob, prob.to_vec(g), lam) <= 1e-6
    assert np.all(path.gammas[0] == 0)
    assert np.all(np.diff(path.objectives) <= 1e-10)


def test_path_objectives_match_oracle():
    _, prob = random_problem(13, q=2, p=3)
    grid = lambda_grid(prob, 8)
    path = solve_path(prob, grid)
    for lam, obj in zip(grid, path.objectives):
        _, best = lasso_enumeration(prob.design, prob.target, lam)
        assert obj == pytest.approx(best, rel=1e-8, abs=1e-12)


def test_path_endpoints():
    m, prob = random_problem(14)
    path = solve_path(prob, [lambda_max(prob), 0.0])
    assert np.all(path.gammas[0] == 0) and len(path.support_sets[0]) == 0
    np.testing.assert_allclose(path.gamma_star, unpenalized_summary(m), atol=1e-6)
    assert len(path.support_sets[1]) == 12


def test_gamma_star_without_zero_entry():
    m, prob = random_problem(15)
    path = solve_path(prob, [lambda_max(prob), lambda_max(prob) / 2])
    np.testing.assert_allclose(path.gamma_star, unpenalized_summary(m), atol=1e-6)


def test_path_grid_must_decrease():
    _, prob = random_problem(16)
    with pytest.raises(InvalidParameterError):
        solve_path(prob, [0.0, 1.0])


def test_support_sizes_diagnostic():
    # supports need not be nested; record only
    _, prob = random_problem(17, q=4, p=5)
    path = solve_path(prob, lambda_grid(prob, 30))
    sizes = path.support_sizes
    assert sizes[0] == 0 and sizes[-1] == 20


def test_warm_and_cold_agree():
    _, prob = random_problem(18, q=3, p=5)
    grid = lambda_grid(prob, 20)
    path = solve_path(prob, grid)
    for lam, g in zip(grid, path.gammas):
        cold = solve_lasso(prob, lam)
        warm_obj = lasso_objective(prob, prob.to_vec(g), lam)
        assert lasso_objective(prob, cold, lam) == pytest.approx(warm_obj, rel=1e-8, abs=1e-14)


def test_row_permutation_invariance():
    rng = np.random.default_rng(19)
    _, prob = random_problem(19, q=3, p=4)
    perm = rng.permutation(prob.target.size)
    shuffled = LassoProblem(prob.design[perm], prob.target[perm], prob.p, prob.q,
                            prob.column_map)
    for lam in (0.0, lambda_max(prob) / 5, lambda_max(prob) / 50):
        np.testing.assert_allclose(solve_lasso(shuffled, lam), solve_lasso(prob, lam),
                                   atol=1e-8)


def test_column_relabelling():
    rng = np.random.default_rng(20)
    _, prob = random_problem(20, q=2, p=3)
    perm = rng.permutation(prob.target.size)
    relab = LassoProblem(prob.design[:, perm], prob.target, prob.p, prob.q,
                         tuple(prob.column_map[k] for k in perm))
    lam = lambda_max(prob) / 7
    v, w = solve_lasso(prob, lam), solve_lasso(relab, lam)
    np.testing.assert_allclose(w, v[perm], atol=1e-8)


def test_convergence_error_reports_residual():
    _, prob = random_problem(21, q=3, p=5)
    with pytest.raises(ConvergenceError) as err:
        solve_lasso(prob, lambda_max(prob) / 100, max_sweeps=1)
    assert err.value.residual > 0


def test_negative_lambda_rejected():
    with pytest.raises(InvalidParameterError):
        solve_lasso(identity_problem([1.0]), -1.0)


def test_tie_stays_zero():
    # |2 D^T t| equals lambda exactly
    v = solve_lasso(identity_problem([1.0, -3.0]), 2.0)
    assert v[0] == 0.0 and v[1] == -2.0
