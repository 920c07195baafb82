import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from daplace.exceptions import LineSearchError
from daplace.placement.projected_bfgs import (armijo_project, epsilon_active_set, kkt_extract, project,
                                              projected_gradient_norm, reduced_bfgs_update, restriction,
                                              search_direction)


def test_projection():
    assert_array_equal(project(np.array([-0.5, 0.3, 1.7])), [0.0, 0.3, 1.0])
    W = np.array([0.0, 0.5, 1.0])
    # gradient pushing against the bounds is not a projected gradient
    assert projected_gradient_norm(W, np.array([2.0, 0.0, -3.0])) == 0.0
    assert_allclose(projected_gradient_norm(W, np.array([-0.2, 0.1, 0.0])), np.sqrt(0.05))


def test_epsilon_active_set():
    W = np.array([0.0, 0.05, 0.5, 0.97, 1.0])
    active, inactive = epsilon_active_set(W, np.zeros(5), eps_k=0.1)
    assert_array_equal(active, [0, 1, 3, 4])
    assert_array_equal(inactive, [2])

    # eps_k from the projected gradient, here zero
    active, inactive = epsilon_active_set(W, np.zeros(5))
    assert_array_equal(active, [0, 4])
    assert_array_equal(inactive, [1, 2, 3])


def test_epsilon_is_capped():
    W = np.array([0.15, 0.5])
    active, _ = epsilon_active_set(W, np.array([10.0, 10.0]), eps_max=0.2)
    assert_array_equal(active, [0])


@pytest.fixture
def update_data(rng):
    n = 6
    inactive = np.array([1, 2, 4])
    W_old = rng.uniform(0.2, 0.8, n)
    W_new = rng.uniform(0.2, 0.8, n)
    Q = np.diag(np.arange(1.0, n + 1))
    return n, inactive, W_old, W_new, Q @ W_old, Q @ W_new


def test_reduced_update_satisfies_secant(update_data):
    n, inactive, W_old, W_new, g_old, g_new = update_data
    B = reduced_bfgs_update(restriction(n, inactive), W_old, W_new, g_old, g_new, inactive)
    R = restriction(n, inactive)
    s, y = R @ (W_new - W_old), R @ (g_new - g_old)
    assert_allclose(B @ y, s, atol=1e-12)
    assert_allclose(B, B.T)
    # acts only on the inactive coordinates
    active = np.setdiff1d(np.arange(n), inactive)
    assert_array_equal(B[active], 0.0)
    assert np.all(np.linalg.eigvalsh(B[np.ix_(inactive, inactive)]) > 0)


def test_reduced_update_skips_without_curvature(update_data):
    n, inactive, W_old, W_new, g_old, _ = update_data
    B = reduced_bfgs_update(np.eye(n), W_old, W_new, g_old, g_old, inactive)
    assert_array_equal(B, restriction(n, inactive))


def test_search_direction(rng):
    n = 5
    grad = rng.standard_normal(n)
    active, inactive = np.array([0, 3]), np.array([1, 2, 4])
    d = search_direction(restriction(n, inactive), grad, active)
    assert_allclose(d, -grad)

    M = rng.standard_normal((3, 3))
    B = np.zeros((n, n))
    B[np.ix_(inactive, inactive)] = M @ M.T + np.eye(3)
    assert grad @ search_direction(B, grad, active) < 0


def quadratic(c):
    return lambda W: 0.5 * float(np.sum((W - c)**2))


def test_armijo_on_quadratic():
    c = np.array([0.3, 1.5, -0.2])
    F = quadratic(c)
    W = np.full(3, 0.5)
    grad = W - c
    alpha, W_next = armijo_project(F, W, -grad, np.linalg.norm(grad), gamma_hat=1e-4)
    assert alpha > 0
    assert np.all((W_next >= 0) & (W_next <= 1))
    step = W_next - W
    assert F(W_next) - F(W) <= -(1e-4 / alpha) * float(step @ step)


def test_armijo_reports_stationary_clamped_point():
    W = np.array([0.0, 1.0])
    grad = np.array([1.0, -1.0])
    alpha, W_next = armijo_project(quadratic(np.array([-1.0, 2.0])), W, -grad, np.linalg.norm(grad), 1e-4)
    assert alpha == 0.0
    assert_array_equal(W_next, W)


def test_armijo_gives_up():
    W = np.full(3, 0.5)
    with pytest.raises(LineSearchError):
        armijo_project(lambda V: float(np.sum(V)), W, np.ones(3), 1.0, 1e-4, max_trials=5)


def test_kkt_multipliers():
    kkt = kkt_extract(np.array([0.0, 1.0, 0.5]), np.array([2.0, -3.0, 0.0]))
    assert_array_equal(kkt.lam_a, [2.0, 0.0, 0.0])
    assert_array_equal(kkt.lam_b, [0.0, 3.0, 0.0])
    assert kkt.residual == 0.0

    kkt = kkt_extract(np.array([0.5, 0.75]), np.array([1.0, -2.0]))
    assert_allclose(kkt.residual, 0.5)


def test_reduced_update_damps_weak_curvature(update_data):
    n, inactive, W_old, W_new, g_old, _ = update_data
    R = restriction(n, inactive)
    s = R @ (W_new - W_old)
    # no curvature at all: y is replaced by floor * s
    B = reduced_bfgs_update(R, W_old, W_new, g_old, g_old, inactive, curvature_floor=1e-3)
    assert_allclose(B @ s, 1e3 * s, rtol=1e-10)
    assert_allclose(B, B.T)
    assert np.all(np.linalg.eigvalsh(B[np.ix_(inactive, inactive)]) > 0)


def test_reduced_update_keeps_strong_curvature(update_data):
    n, inactive, W_old, W_new, g_old, g_new = update_data
    R = restriction(n, inactive)
    plain = reduced_bfgs_update(R, W_old, W_new, g_old, g_new, inactive)
    # Q has eigenvalues >= 1, far above the floor
    damped = reduced_bfgs_update(R, W_old, W_new, g_old, g_new, inactive, curvature_floor=1e-3)
    assert_allclose(damped, plain)
