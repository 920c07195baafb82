import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from daplace.assimilation import LowerOptions
from daplace.checks import upper_gradient_error
from daplace.constants import WORKERS_ENV
from daplace.exceptions import AdjointSolverError, ParameterError, ShapeError
from daplace.experiments.training import build_training_set
from daplace.placement.bilevel import (BilevelProblem, PlacementVector, UpperConfig, penalty_value, pool_map,
                                       solve_bilevel_adjoint, upper_cost, worker_count)

TIGHT = LowerOptions(tol=1e-10, max_iter=500)


def random_placement(model, rng):
    return PlacementVector(w=rng.uniform(0.2, 0.8, model.grid.n_s), sigma=rng.uniform(0.2, 0.8, model.tg.n_T))


def test_placement_vector():
    W = PlacementVector.ones(4, 3)
    assert W.is_binary()
    assert W.flat.shape == (7,)
    V = PlacementVector.from_flat(np.array([0.0, 0.5, 1.0, 1.0, 0.25]), 3)
    assert_array_equal(V.w, [0.0, 0.5, 1.0])
    assert_array_equal(V.sigma, [1.0, 0.25])
    assert not V.is_binary()
    with pytest.raises(ParameterError):
        PlacementVector(w=np.array([1.2]), sigma=np.array([0.5]))


@pytest.mark.parametrize('bad', [np.nan, np.inf, -np.inf])
@pytest.mark.parametrize('which', ['w', 'sigma'])
def test_placement_vector_rejects_non_finite(bad, which):
    entries = {'w': np.array([0.5, 1.0]), 'sigma': np.array([0.0, 0.5])}
    entries[which][0] = bad
    with pytest.raises(ParameterError, match='non-finite'):
        PlacementVector(**entries)
    with pytest.raises(ParameterError):
        PlacementVector.from_flat(np.concatenate([entries['w'], entries['sigma']]), 2)


@pytest.mark.parametrize('kwargs', [{'beta_w': -1.0}, {'beta': -0.1}, {'gamma_hat': 1.0}, {'eps_penalty': 0.7}])
def test_upper_config_validation(kwargs):
    with pytest.raises(ParameterError):
        UpperConfig(**kwargs).penalty


def test_penalty_modes():
    W = PlacementVector(w=np.array([0.0, 1.0, 0.5]), sigma=np.array([1.0, 0.0]))
    cfg = UpperConfig(beta_w=2.0, beta_sigma=3.0, eps_penalty=0.25)
    assert_allclose(penalty_value(W, cfg, 'linear'), 2.0 * 1.5 + 3.0)
    assert_allclose(penalty_value(W, cfg, 'sparsity'), 2.0 * 2.0 + 3.0)
    with pytest.raises(ValueError):
        penalty_value(W, cfg, 'l1')


def test_empty_training_set(model6):
    with pytest.raises(ValueError):
        BilevelProblem(model6, [], UpperConfig())


def test_cost_needs_matching_lengths(model6, training6):
    with pytest.raises(ShapeError):
        upper_cost(PlacementVector.ones(model6.grid.n_s, model6.tg.n_T), [], training6, UpperConfig(), model6)


@pytest.fixture(scope='module')
def evaluated(model6, training6):
    rng = np.random.default_rng(11)
    cfg = UpperConfig(beta=0.09, beta_w=1e-3, beta_sigma=2e-3, lower=TIGHT)
    problem = BilevelProblem(model6, training6, cfg)
    return problem, problem.evaluate(random_placement(model6, rng), 'linear')


def test_adjoint_solve(evaluated, model6, training6):
    problem, evaluation = evaluated
    adj = solve_bilevel_adjoint(evaluation.sols[0], training6[0], evaluation.W, problem.cfg, model6)
    assert adj.residual <= problem.cfg.adjoint_tol
    assert adj.applications > 0
    assert_allclose(adj.zeta[0], -adj.tau, atol=1e-14)
    assert np.all(adj.tau[model6.grid.boundary] == 0.0)


def test_adjoint_solver_failure(evaluated, model6, training6):
    problem, evaluation = evaluated
    cfg = UpperConfig(adjoint_tol=1e-15, adjoint_max_apps=1, lower=TIGHT)
    with pytest.raises(AdjointSolverError):
        solve_bilevel_adjoint(evaluation.sols[0], training6[0], evaluation.W, cfg, model6)


def test_unobserved_time_gives_penalty_gradient(model6, training6, rng):
    cfg = UpperConfig(beta_w=1e-3, beta_sigma=2e-3, lower=TIGHT)
    problem = BilevelProblem(model6, training6, cfg)
    n_s, n_T = model6.grid.n_s, model6.tg.n_T

    evaluation = problem.evaluate(PlacementVector(w=rng.uniform(0.2, 0.8, n_s), sigma=np.zeros(n_T)), 'linear')
    grad, _ = problem.gradient(evaluation, 'linear')
    assert_allclose(grad[:n_s], cfg.beta_w, rtol=1e-12)

    evaluation = problem.evaluate(PlacementVector(w=np.zeros(n_s), sigma=rng.uniform(0.2, 0.8, n_T)), 'linear')
    grad, _ = problem.gradient(evaluation, 'linear')
    assert_allclose(grad[n_s:], cfg.beta_sigma, rtol=1e-12)


def test_exact_reconstruction_has_no_data_gradient(model6, rng):
    training = build_training_set('single', 1, 0, model6, background='truth')
    cfg = UpperConfig(beta=0.0, beta_w=1e-3, beta_sigma=2e-3, lower=TIGHT)
    problem = BilevelProblem(model6, training, cfg)
    evaluation = problem.evaluate(random_placement(model6, rng), 'linear')
    grad, adjs = problem.gradient(evaluation, 'linear')
    assert evaluation.cost == pytest.approx(1e-3 * np.sum(evaluation.W.w) + 2e-3 * np.sum(evaluation.W.sigma))
    assert np.max(np.abs(adjs[0].tau)) <= 1e-12
    assert_allclose(grad, np.concatenate([np.full(model6.grid.n_s, 1e-3), np.full(model6.tg.n_T, 2e-3)]), atol=1e-12)


def test_sensor_and_window_gradients_balance(model6, training6, rng):
    # both data terms are bilinear in (w, sigma): w . dF/dw = sigma . dF/dsigma without penalty
    cfg = UpperConfig(beta_w=0.0, beta_sigma=0.0, lower=TIGHT)
    problem = BilevelProblem(model6, training6, cfg)
    evaluation = problem.evaluate(random_placement(model6, rng), 'linear')
    grad, _ = problem.gradient(evaluation, 'linear')
    n_s = model6.grid.n_s
    W = evaluation.W
    assert_allclose(W.w @ grad[:n_s], W.sigma @ grad[n_s:], rtol=1e-8, atol=1e-14)


@pytest.mark.parametrize('mode', ['linear', 'sparsity'])
def test_gradient_matches_central_differences(model6, mode):
    assert upper_gradient_error(model6, mode, seed=1) <= 1e-4


def test_solve_counts(evaluated):
    problem, evaluation = evaluated
    before = problem.counter.parabolic
    problem.gradient(evaluation, 'linear')
    assert problem.counter.parabolic > before
    assert problem.counter.elliptic > 0
    assert problem.lower_iterations and all(it > 0 for it in problem.lower_iterations)


def test_pool_map_keeps_order(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, '3')
    assert worker_count() == 3
    assert pool_map(lambda x: x * x, list(range(10))) == [x * x for x in range(10)]
    monkeypatch.delenv(WORKERS_ENV)
    assert worker_count() == 1
