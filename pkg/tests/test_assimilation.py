import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from daplace.assimilation import (DAProblem, LowerOptions, assimilate, cost_and_gradient, lower_cost,
                                  make_observations, observe)
from daplace.checks import lower_gradient_error, random_interior_field
from daplace.exceptions import ParameterError, ShapeError
from daplace.experiments import ExperimentConfig
from daplace.experiments.training import build_training_set, reference_initial_condition


def make_problem(model, pair, w=1.0, sigma=1.0, **kwargs):
    return DAProblem(model=model, u_b=pair.u_b, z_o=pair.z_o,
                     w=np.full(model.grid.n_s, w), sigma=np.full(model.tg.n_T, sigma),
                     forcing=pair.forcing, **kwargs)


def test_noise_free_observations(model6, training6):
    pair = training6[0]
    z = make_observations(pair.y_dag, model6, 0.0, seed=5)
    assert_array_equal(z.values, observe(pair.y_dag, model6).values)
    assert z.values.shape == (model6.grid.n_s, model6.n_steps + 1)


def test_noise_is_seeded(model6, training6):
    y = training6[0].y_dag
    a = make_observations(y, model6, 0.1, seed=7)
    b = make_observations(y, model6, 0.1, seed=7)
    c = make_observations(y, model6, 0.1, seed=8)
    assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_negative_noise(model6, training6):
    with pytest.raises(ParameterError):
        make_observations(training6[0].y_dag, model6, -0.1)


def test_problem_validation(model6, training6):
    pair = training6[0]
    with pytest.raises(ParameterError):
        make_problem(model6, pair, theta=0.0)
    with pytest.raises(ShapeError):
        DAProblem(model=model6, u_b=pair.u_b, z_o=pair.z_o, w=np.ones(3), sigma=np.ones(model6.tg.n_T))
    with pytest.raises(ValueError):
        LowerOptions(precondition='lbfgs')


def test_weights_vanish_at_initial_time(model6, training6):
    prob = make_problem(model6, training6[0])
    assert prob.weights.shape == (model6.grid.n_s, model6.n_steps + 1)
    assert_array_equal(prob.weights[:, 0], 0.0)
    assert np.all(prob.weights >= 0.0)


def test_unobserved_cost_is_regularization(model6, training6, rng):
    pair = training6[0]
    prob = make_problem(model6, pair, w=0.7, sigma=0.0)
    u = random_interior_field(model6, rng)
    d = u - prob.u_b
    expected = 0.5 * prob.alpha * model6.inner_h(d, d) + 0.5 * prob.theta * model6.energy_h(d)
    assert_allclose(lower_cost(prob, u), expected, rtol=1e-12)


def test_gradient_matches_central_differences(model6):
    assert lower_gradient_error(model6, seed=2) <= 1e-6


@pytest.mark.slow
def test_gradient_matches_central_differences_larger_grid(model10):
    assert lower_gradient_error(model10, seed=0, delta=1e-4) <= 1e-6


def test_gradient_is_zero_on_boundary(model6, training6, rng):
    prob = make_problem(model6, training6[0])
    _, grad, y, p = cost_and_gradient(prob, random_interior_field(model6, rng))
    assert np.all(grad[model6.grid.boundary] == 0.0)
    assert y.shape == p.shape == model6.field_shape


def test_unobserved_problem_returns_background(model6, training6):
    pair = training6[0]
    u_b = reference_initial_condition(model6, 0.1, 0.0)
    prob = DAProblem(model=model6, u_b=u_b, z_o=pair.z_o, w=np.zeros(model6.grid.n_s),
                     sigma=np.ones(model6.tg.n_T), forcing=pair.forcing)
    sol = assimilate(prob, u_init=np.zeros(model6.grid.n_nodes), opts=LowerOptions(precondition='h1'))
    assert np.max(np.abs(sol.u - u_b)) <= 1e-10
    assert sol.grad_norm <= 1e-6


def test_assimilation_lowers_cost(model6, training6):
    pair = training6[0]
    prob = make_problem(model6, pair)
    start = lower_cost(prob, pair.u_b)
    sol = assimilate(prob)
    assert sol.cost < start
    assert sol.grad_norm <= LowerOptions().tol
    assert np.all(sol.u[model6.grid.boundary] == 0.0)


def test_exact_background_is_optimal(model6):
    # noise free data of the background itself: u_b minimizes the cost with zero residual
    pair = build_training_set('single', 1, 0, model6, background='truth')[0]
    sol = assimilate(make_problem(model6, pair))
    assert sol.iterations == 0
    assert sol.cost <= 1e-20


def test_every_accepted_step_lowers_the_cost(model6, training6):
    prob = make_problem(model6, training6[0])
    sols = [assimilate(prob, opts=LowerOptions(max_iter=k)) for k in range(6)]
    assert sols[-1].iterations >= 1
    for before, after in zip(sols, sols[1:]):
        if after.iterations > before.iterations:
            assert after.cost < before.cost


def test_full_placement_recovers_the_initial_condition():
    cfg = ExperimentConfig()
    model = cfg.model()
    pair = build_training_set('single', 1, 0, model)[0]
    sol = assimilate(make_problem(model, pair, theta=cfg.theta, alpha=cfg.alpha))
    assert model.norm_h(sol.u - pair.u_dag) <= 0.05 * model.norm_h(pair.u_dag)
    assert model.norm_ht(sol.y - pair.y_dag) <= 0.05 * model.norm_ht(pair.y_dag)


def test_fast_diffusion_hides_the_initial_condition():
    cfg = ExperimentConfig(kappa=1.0)
    model = cfg.model()
    pair = build_training_set('single', 1, 0, model)[0]
    sol = assimilate(make_problem(model, pair, theta=cfg.theta, alpha=cfg.alpha))
    assert model.norm_h(sol.u - pair.u_dag) >= 0.5 * model.norm_h(pair.u_dag)
