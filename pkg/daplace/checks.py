'''
Consistency checks of the discrete derivatives: the lower gradient and the end-to-end placement
gradient against central differences, and the duality of the linearized forward and backward
solvers.
'''

import logging
from typing import Optional

import numpy as np

from daplace.assimilation import DAProblem, LowerOptions, cost_and_gradient, lower_cost
from daplace.experiments.training import build_training_set
from daplace.grids import build_spatial_grid, build_time_grid
from daplace.pde.solvers import ParabolicModel
from daplace.placement.bilevel import BilevelProblem, PlacementVector, UpperConfig

logger = logging.getLogger(__name__)


def small_model(m: int, n: int, newton_tol: float=1e-13) -> ParabolicModel:
    # tight Newton tolerance keeps the difference quotients clean
    return ParabolicModel(build_spatial_grid(m), build_time_grid(n), newton_tol=newton_tol)


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    return float(np.linalg.norm(a - b) / scale)


def random_interior_field(model: ParabolicModel, rng: np.random.Generator, scale: float=1.0) -> np.ndarray:
    u = np.zeros(model.grid.n_nodes)
    u[model.interior] = scale * rng.standard_normal(len(model.interior))
    return u


def lower_gradient_error(model: ParabolicModel, seed: int=0, delta: float=1e-5) -> float:
    '''
    Relative error between the lower gradient and central differences of the lower cost in every
    interior unknown, at a random u and a random placement.
    '''
    rng = np.random.default_rng(seed)
    pair = build_training_set('single', 1, seed, model)[0]
    prob = DAProblem(model=model, u_b=pair.u_b, z_o=pair.z_o,
                     w=rng.uniform(0, 1, model.grid.n_s), sigma=rng.uniform(0, 1, model.tg.n_T),
                     forcing=pair.forcing)
    u = random_interior_field(model, rng, scale=0.5)

    _, grad, _, _ = cost_and_gradient(prob, u)
    # the gradient is the L2_h representative; partial derivatives carry the factor h^2
    analytic = model.grid.h**2 * grad[model.interior]

    fd = np.zeros(len(model.interior))
    for i, k in enumerate(model.interior):
        e = np.zeros_like(u)
        e[k] = delta
        fd[i] = (lower_cost(prob, u + e) - lower_cost(prob, u - e)) / (2 * delta)

    return _relative(analytic, fd)


def adjoint_identity_error(model: ParabolicModel, seed: int=0, trials: int=20) -> float:
    '''
    max over random (v, q) of |<M v, q> - <v, M* q>| / (||v|| ||q||), with M the linearized
    forward map at a random state and M* the backward solve.
    '''
    rng = np.random.default_rng(seed)
    y = model.solve_forward(random_interior_field(model, rng))
    worst = 0.0
    for _ in range(trials):
        v = random_interior_field(model, rng)
        q = rng.standard_normal(model.field_shape)
        q[:, model.grid.boundary] = 0.0
        lhs = model.inner_ht(model.solve_linearized_forward(y, v), q)
        rhs = model.inner_h(v, model.solve_adjoint_backward(y, volumetric_source=q)[0])
        worst = max(worst, abs(lhs - rhs) / (model.norm_h(v) * model.norm_ht(q)))
    return worst


def upper_gradient_error(model: ParabolicModel, mode: str='linear', seed: int=0,
                         delta: float=1e-3, cfg: Optional[UpperConfig]=None) -> float:
    '''
    Relative error between the placement gradient and central differences of the reduced upper
    cost, re-assimilating the training pair at every perturbed placement.
    '''
    rng = np.random.default_rng(seed)
    cfg = cfg if cfg is not None else UpperConfig(beta=0.09, beta_w=1e-3, beta_sigma=1e-3, eps_penalty=0.5,
                                                  lower=LowerOptions(tol=1e-10, max_iter=500))
    training = build_training_set('single', 1, seed, model)
    problem = BilevelProblem(model, training, cfg)

    W = PlacementVector(w=rng.uniform(0.3, 0.7, model.grid.n_s), sigma=rng.uniform(0.3, 0.7, model.tg.n_T))
    evaluation = problem.evaluate(W, mode)
    grad, _ = problem.gradient(evaluation, mode)
    warm = [sol.u for sol in evaluation.sols]

    flat = W.flat
    fd = np.zeros(len(flat))
    for i in range(len(flat)):
        e = np.zeros_like(flat)
        e[i] = delta
        plus = problem.evaluate(PlacementVector.from_flat(flat + e, W.n_s), mode, warm=warm).cost
        minus = problem.evaluate(PlacementVector.from_flat(flat - e, W.n_s), mode, warm=warm).cost
        fd[i] = (plus - minus) / (2 * delta)

    return _relative(grad, fd)


def run_checks(m: int=6, n: int=4, seed: int=0) -> dict:
    '''all checks on an m x m grid with n interior time steps'''
    model = small_model(m, n)
    results = {'lower_gradient': lower_gradient_error(model, seed),
               'adjoint_identity': adjoint_identity_error(model, seed),
               'upper_gradient_linear': upper_gradient_error(model, 'linear', seed),
               'upper_gradient_sparsity': upper_gradient_error(model, 'sparsity', seed)}
    for name, err in results.items():
        logger.info('%s: relative error %.3e', name, err)
    return results
