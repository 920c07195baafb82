'''
The 4D-VAR lower-level problem: reconstruct the initial condition u from pointwise, time
mollified observations z_o weighted by the placement (w, sigma).

    J(u) = 1/2 sum_k tau sum_s w_s (sum_i sigma_i rho_i(t_k)) [y(x_s, t_k) - z_o(x_s, t_k)]^2
           + alpha/2 ||u - u_b||^2 + theta/2 ||grad(u - u_b)||^2

The reduced gradient comes from the exact discrete adjoint of the forward scheme and is
minimized by BFGS in the discrete L2 inner product.
'''

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from daplace.constants import (ARMIJO_C, LOWER_MAX_HALVINGS, LOWER_MAX_ITER, LOWER_TOL,
                               __preconditioners__)
from daplace.exceptions import ParameterError, ShapeError, StalledSearchError
from daplace.pde.solvers import ParabolicModel, SolveCounter

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ObservationSeries:
    '''
    values[s, k] = z_o(x_s, t_k), shape (n_s, n_steps+1). sd and seed describe the added noise.
    '''
    values: np.ndarray
    sd: float = 0.0
    seed: Optional[int] = None


@dataclass(frozen=True, eq=False)
class DAProblem:
    model: ParabolicModel
    u_b: np.ndarray
    z_o: ObservationSeries
    w: np.ndarray
    sigma: np.ndarray
    forcing: Optional[np.ndarray] = None
    theta: float = 1e-2
    alpha: float = 0.1

    def __post_init__(self):
        if self.theta <= 0 or self.alpha <= 0:
            raise ParameterError(f'theta and alpha must be positive, got {self.theta}, {self.alpha}')
        grid = self.model.grid
        if len(self.w) != grid.n_s:
            raise ShapeError(f'placement w has {len(self.w)} entries, grid has {grid.n_s} candidates')
        if len(self.sigma) != self.model.tg.n_T:
            raise ShapeError(f'placement sigma has {len(self.sigma)} entries, '
                             f'time grid has {self.model.tg.n_T} subintervals')
        if self.z_o.values.shape != (grid.n_s, self.model.n_steps + 1):
            raise ShapeError(f'observations have shape {self.z_o.values.shape}')

    @property
    def weights(self) -> np.ndarray:
        '''omega[s, k] = w_s * sum_i sigma_i rho_i(t_k)'''
        return np.outer(self.w, self.model.R.T @ self.sigma)

    def with_placement(self, w: np.ndarray, sigma: np.ndarray) -> 'DAProblem':
        return replace(self, w=np.asarray(w, dtype=float), sigma=np.asarray(sigma, dtype=float))


@dataclass(frozen=True, eq=False)
class LowerSolution:
    u: np.ndarray
    y: np.ndarray
    p: np.ndarray
    cost: float
    grad_norm: float
    iterations: int


@dataclass(frozen=True)
class LowerOptions:
    tol: float = LOWER_TOL
    max_iter: int = LOWER_MAX_ITER
    precondition: str = 'l2'
    max_halvings: int = LOWER_MAX_HALVINGS

    def __post_init__(self):
        if self.precondition not in __preconditioners__:
            raise ValueError(f'preconditioner {self.precondition} not supported.')


def observe(y: np.ndarray, model: ParabolicModel) -> ObservationSeries:
    '''Noise free samples of y at every sensor candidate and time index.'''
    return ObservationSeries(values=model.observe(y))


def make_observations(y_true: np.ndarray, model: ParabolicModel, sd: float,
                      seed: Optional[int]=None) -> ObservationSeries:
    '''
    observe(y_true) plus i.i.d. N(0, sd^2) noise from numpy's default generator seeded by seed.

    Raises
    ------
    ParameterError
        if sd is negative.
    '''
    if sd < 0:
        raise ParameterError(f'noise standard deviation must be nonnegative, got {sd}')

    values = model.observe(y_true)
    if sd > 0:
        rng = np.random.default_rng(seed)
        values = values + rng.normal(0.0, sd, size=values.shape)
    return ObservationSeries(values=values, sd=sd, seed=seed)


def _misfit(prob: DAProblem, y: np.ndarray) -> np.ndarray:
    return prob.model.observe(y) - prob.z_o.values


def _cost_from_state(prob: DAProblem, u: np.ndarray, y: np.ndarray) -> float:
    model = prob.model
    mis = _misfit(prob, y)
    obs = 0.5 * model.tg.tau * np.sum(prob.weights[:, 1:] * mis[:, 1:]**2)
    d = u - prob.u_b
    reg = 0.5 * prob.alpha * model.inner_h(d, d) + 0.5 * prob.theta * model.energy_h(d)
    return float(obs + reg)


def lower_cost(prob: DAProblem, u: np.ndarray, counter: Optional[SolveCounter]=None) -> float:
    '''Evaluates the data assimilation cost at initial condition u.'''
    y = prob.model.solve_forward(u, prob.forcing, counter=counter)
    return _cost_from_state(prob, u, y)


def cost_and_gradient(prob: DAProblem, u: np.ndarray,
                      counter: Optional[SolveCounter]=None) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    '''
    Returns (cost, gradient, y, p). The gradient is the discrete L2 Riesz representative

        alpha (u - u_b) - theta Laplacian_h (u - u_b) + p(0),

    where p solves the backward adjoint with nodal sources omega * misfit / h^2.
    '''
    model = prob.model
    y = model.solve_forward(u, prob.forcing, counter=counter)
    cost = _cost_from_state(prob, u, y)
    p = model.solve_adjoint_backward(y, nodal_source=prob.weights * _misfit(prob, y), counter=counter)

    d = u - prob.u_b
    grad = prob.alpha * d + prob.theta * model.apply_neg_laplacian(d) + p[0]
    grad[model.grid.boundary] = 0.0
    return cost, grad, y, p


def lower_gradient(prob: DAProblem, u: np.ndarray, counter: Optional[SolveCounter]=None) -> np.ndarray:
    return cost_and_gradient(prob, u, counter=counter)[1]


def _rounding_level(f: float) -> float:
    return 4.0 * np.finfo(float).eps * max(abs(f), np.finfo(float).tiny)


def assimilate(prob: DAProblem, u_init: Optional[np.ndarray]=None,
               opts: Optional[LowerOptions]=None,
               counter: Optional[SolveCounter]=None) -> LowerSolution:
    '''
    Minimizes the data assimilation cost by BFGS with Armijo backtracking.

    The iteration runs on the interior unknowns scaled by h, so Euclidean BFGS there is BFGS in
    the discrete L2 inner product. The initial inverse Hessian is the identity ('l2') or the
    inverse of alpha*I - theta*Laplacian_h ('h1'); updates failing the curvature condition
    are skipped.

    Parameters
    ----------
    prob: DAProblem
    u_init: np.ndarray
        starting point. Default is the background u_b.
    opts: LowerOptions
        tolerance on the L2 gradient norm, iteration cap, preconditioner.

    Returns
    -------
    sol: LowerSolution

    Raises
    ------
    StalledSearchError
        if the line search fails after opts.max_halvings halvings while the predicted decrease
        is still above the rounding level of the cost; carries the last iterate.
    '''
    opts = opts if opts is not None else LowerOptions()
    model = prob.model
    h = model.grid.h
    interior = model.interior
    u = (prob.u_b if u_init is None else u_init).copy()
    u[model.grid.boundary] = 0.0

    def evaluate(x):
        v = np.zeros(model.grid.n_nodes)
        v[interior] = x / h
        f, g, y, p = cost_and_gradient(prob, v, counter=counter)
        return f, h * g[interior], v, y, p

    if opts.precondition == 'h1':
        op = (prob.alpha * model.I + prob.theta * model.L).toarray()
        H0 = np.linalg.inv(op) if op.size else op
    else:
        H0 = np.eye(len(interior))

    x = h * u[interior]
    f, g, u, y, p = evaluate(x)
    H = H0.copy()
    it = 0
    at_rounding = False

    while True:
        # ||grad_x|| equals the discrete L2 norm of the gradient field
        gnorm = float(np.linalg.norm(g))
        if gnorm <= opts.tol or it >= opts.max_iter:
            break

        d = -H @ g
        slope = float(g @ d)
        if slope >= 0:
            H = H0.copy()
            d = -H @ g
            slope = float(g @ d)

        t = 1.0
        for _ in range(opts.max_halvings + 1):
            f_new, g_new, u_new, y_new, p_new = evaluate(x + t * d)
            if f_new <= f + ARMIJO_C * t * slope:
                break
            t *= 0.5
        else:
            # the predicted decrease is below the rounding level of the cost: nothing left to gain
            if abs(slope) <= _rounding_level(f):
                logger.debug('DA line search at rounding level, gradient norm %.3e', gnorm)
                at_rounding = True
                break
            raise StalledSearchError(f'lower-level line search stalled at iteration {it}, '
                                     f'gradient norm {gnorm:.3e}', last_iterate=u)

        s = t * d
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            rho = 1.0 / sy
            Hy = H @ yv
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho**2 * (yv @ Hy) + rho) * np.outer(s, s)

        x = x + s
        f, g, u, y, p = f_new, g_new, u_new, y_new, p_new
        it += 1
        logger.debug('DA iteration %i: cost %.6e, step %.3e', it, f, t)

    if gnorm > opts.tol and not at_rounding:
        logger.warning('data assimilation stopped at max_iter=%i with gradient norm %.3e', opts.max_iter, gnorm)

    return LowerSolution(u=u, y=y, p=p, cost=f, grad_norm=gnorm, iterations=it)
