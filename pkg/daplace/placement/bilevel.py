'''
Upper level of the placement problem: training loss, coupled bilevel adjoint and the gradient
with respect to the placement W = (w, sigma).

For each training pair the lower-level optimality condition G(u, W) = 0 is differentiated
implicitly. The adjoint triple (eta, zeta, tau) solves

    eta  backward:  M_k eta^k = eta^{k+1} + tau_t [omega zeta / h^2 - g''(y) p zeta - 2 (y - y_dag)]
    zeta forward:   linearized state with zeta(0) = -tau
    tau  elliptic:  -theta Lap tau + alpha tau = eta(0) - 2 beta (u - u_dag)

The system is affine in tau and is solved matrix free by GMRES on (I - T_lin) tau = r, one
application costing a linearized forward, a backward and an elliptic solve.
'''

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, List, Optional, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from daplace.assimilation import DAProblem, LowerOptions, LowerSolution, assimilate
from daplace.constants import (ADJOINT_MAX_APPS, ADJOINT_TOL, CURVATURE_FLOOR, EPS_ACTIVE_MAX, GAMMA_HAT,
                               STALL_RTOL, STALL_WINDOW, UPPER_MAX_ITER, UPPER_TOL, WORKERS_ENV,
                               __modes__)
from daplace.exceptions import AdjointSolverError, ParameterError, ShapeError
from daplace.pde.solvers import ParabolicModel, SolveCounter
from daplace.sparsity import PenaltyFamily, Phi_sum, phi_derivative

if TYPE_CHECKING:
    from daplace.experiments.training import TrainingPair

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PlacementVector:
    '''
    Relaxed sensor (w, length n_s) and time subinterval (sigma, length n_T) selection, every
    entry in [0, 1].
    '''
    w: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        for name, v in (('w', self.w), ('sigma', self.sigma)):
            if not np.all(np.isfinite(v)):
                raise ParameterError(f'placement {name} has non-finite entries')
            if np.any(v < 0.0) or np.any(v > 1.0):
                raise ParameterError(f'placement {name} leaves [0, 1]')

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.w, self.sigma])

    @property
    def n_s(self) -> int:
        return len(self.w)

    @classmethod
    def from_flat(cls, W: np.ndarray, n_s: int) -> 'PlacementVector':
        W = np.asarray(W, dtype=float)
        return cls(w=W[:n_s].copy(), sigma=W[n_s:].copy())

    @classmethod
    def ones(cls, n_s: int, n_T: int) -> 'PlacementVector':
        return cls(w=np.ones(n_s), sigma=np.ones(n_T))

    def is_binary(self) -> bool:
        return bool(np.all(np.isin(self.flat, (0.0, 1.0))))


@dataclass(frozen=True)
class UpperConfig:
    beta: float = 0.09
    beta_w: float = 1e-3
    beta_sigma: float = 0.0
    eps_penalty: float = 0.5
    eps_active_max: float = EPS_ACTIVE_MAX
    tol: float = UPPER_TOL
    max_iter: int = UPPER_MAX_ITER
    gamma_hat: float = GAMMA_HAT
    stall_window: int = STALL_WINDOW
    stall_rtol: float = STALL_RTOL
    curvature_floor: float = CURVATURE_FLOOR
    adjoint_tol: float = ADJOINT_TOL
    adjoint_max_apps: int = ADJOINT_MAX_APPS
    # lower-level problem
    theta: float = 1e-2
    alpha: float = 0.1
    lower: LowerOptions = field(default_factory=LowerOptions)

    def __post_init__(self):
        if self.beta_w < 0 or self.beta_sigma < 0 or self.beta < 0:
            raise ParameterError('penalty weights beta, beta_w, beta_sigma must be nonnegative')
        if not 0.0 < self.gamma_hat < 1.0:
            raise ParameterError(f'Armijo constant must lie in (0, 1), got {self.gamma_hat}')
        if self.stall_window < 1 or self.stall_rtol < 0:
            raise ParameterError(f'stall rule needs a window >= 1 and rtol >= 0, '
                                 f'got {self.stall_window}, {self.stall_rtol}')
        if self.curvature_floor < 0:
            raise ParameterError(f'curvature floor must be nonnegative, got {self.curvature_floor}')

    @property
    def penalty(self) -> PenaltyFamily:
        return PenaltyFamily(self.eps_penalty)


@dataclass(frozen=True, eq=False)
class BilevelAdjoint:
    eta: np.ndarray
    zeta: np.ndarray
    tau: np.ndarray
    residual: float
    applications: int


def worker_count() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, '1')))


def pool_map(func: Callable, items: Sequence) -> list:
    '''order preserving map over a thread pool sized by the DAPLACE_WORKERS variable'''
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _check_mode(mode: str) -> None:
    if mode not in __modes__:
        raise ValueError(f'penalty mode {mode} not supported.')


def make_problem(model: ParabolicModel, pair: 'TrainingPair', W: PlacementVector,
                 cfg: UpperConfig) -> DAProblem:
    return DAProblem(model=model, u_b=pair.u_b, z_o=pair.z_o, w=W.w, sigma=W.sigma,
                     forcing=pair.forcing, theta=cfg.theta, alpha=cfg.alpha)


def penalty_value(W: PlacementVector, cfg: UpperConfig, mode: str) -> float:
    _check_mode(mode)
    if mode == 'linear':
        return cfg.beta_w * float(np.sum(W.w)) + cfg.beta_sigma * float(np.sum(W.sigma))
    fam = cfg.penalty
    return cfg.beta_w * Phi_sum(fam, W.w) + cfg.beta_sigma * Phi_sum(fam, W.sigma)


def upper_cost(W: PlacementVector, sols: Sequence[LowerSolution],
               training: Sequence['TrainingPair'], cfg: UpperConfig,
               model: ParabolicModel, mode: str='linear') -> float:
    '''
    sum_j ||y_j - y_dag_j||^2_{L2(Q)} + beta sum_j ||u_j - u_dag_j||^2_{L2} plus the linear or
    sparsity enforcing placement penalty.

    Raises
    ------
    ShapeError
        if the number of lower solutions and training pairs differ.
    '''
    if len(sols) != len(training):
        raise ShapeError(f'{len(sols)} lower solutions for {len(training)} training pairs')

    loss = 0.0
    for sol, pair in zip(sols, training):
        dy = sol.y - pair.y_dag
        du = sol.u - pair.u_dag
        loss += model.inner_ht(dy, dy) + cfg.beta * model.inner_h(du, du)
    return loss + penalty_value(W, cfg, mode)


def solve_bilevel_adjoint(sol: LowerSolution, pair: 'TrainingPair', W: PlacementVector,
                          cfg: UpperConfig, model: ParabolicModel,
                          tau0: Optional[np.ndarray]=None,
                          counter: Optional[SolveCounter]=None) -> BilevelAdjoint:
    '''
    Solves the coupled adjoint system of one training pair at the lower solution sol.

    Parameters
    ----------
    sol: LowerSolution
        lower-level solution at W, solved to tolerance.
    pair: TrainingPair
    W: PlacementVector
    cfg: UpperConfig
    model: ParabolicModel
    tau0: np.ndarray
        optional starting guess for tau (e.g. the previous outer iteration's).

    Returns
    -------
    adjoint: BilevelAdjoint

    Raises
    ------
    AdjointSolverError
        if GMRES does not reach cfg.adjoint_tol within cfg.adjoint_max_apps applications.
    '''
    interior = model.interior
    omega = np.outer(W.w, model.R.T @ W.sigma)
    loss_source = -2.0 * (sol.y - pair.y_dag)
    u_source = -2.0 * cfg.beta * (sol.u - pair.u_dag)
    apps = 0

    def sweep(tau: np.ndarray, affine: bool):
        zeta = -model.solve_linearized_forward(sol.y, tau, counter=counter)
        eta = model.solve_adjoint_backward(sol.y,
                                           nodal_source=omega * model.observe(zeta),
                                           volumetric_source=loss_source if affine else None,
                                           zeta_coupling=(sol.p, zeta),
                                           counter=counter)
        rhs = eta[0] + u_source if affine else eta[0]
        return zeta, eta, model.solve_elliptic(rhs, cfg.theta, cfg.alpha, counter=counter)

    def embed(x: np.ndarray) -> np.ndarray:
        v = np.zeros(model.grid.n_nodes)
        v[interior] = x
        return v

    def matvec(x: np.ndarray) -> np.ndarray:
        nonlocal apps
        apps += 1
        x = np.ravel(x)
        return x - sweep(embed(x), affine=False)[2][interior]

    _, _, r_full = sweep(np.zeros(model.grid.n_nodes), affine=True)
    r = r_full[interior]
    r_norm = float(np.linalg.norm(r))

    if r_norm == 0.0:
        tau = np.zeros(model.grid.n_nodes)
        residual = 0.0
    else:
        n = len(interior)
        op = LinearOperator((n, n), matvec=matvec, dtype=float)
        x0 = None if tau0 is None else tau0[interior]
        x, info = gmres(op, r, x0=x0, rtol=cfg.adjoint_tol, atol=0.0,
                        restart=cfg.adjoint_max_apps, maxiter=1)
        residual = float(np.linalg.norm(matvec(x) - r) / r_norm)
        if info != 0 and residual > cfg.adjoint_tol:
            raise AdjointSolverError(residual, apps)
        tau = embed(x)

    zeta, eta, _ = sweep(tau, affine=True)
    return BilevelAdjoint(eta=eta, zeta=zeta, tau=tau, residual=residual, applications=apps)


def misfit_tensor(sols: Sequence[LowerSolution], adjoints: Sequence[BilevelAdjoint],
                  training: Sequence['TrainingPair'], model: ParabolicModel) -> np.ndarray:
    '''E[s, k] = tau sum_j zeta_j(x_s, t_k) (y_j(x_s, t_k) - z_oj(x_s, t_k)), zero at k = 0'''
    E = np.zeros((model.grid.n_s, model.n_steps + 1))
    for sol, adj, pair in zip(sols, adjoints, training):
        E += model.observe(adj.zeta) * (model.observe(sol.y) - pair.z_o.values)
    E[:, 0] = 0.0
    return model.tg.tau * E


def penalty_gradient(W: PlacementVector, cfg: UpperConfig, mode: str) -> np.ndarray:
    _check_mode(mode)
    if mode == 'linear':
        return np.concatenate([np.full(len(W.w), cfg.beta_w), np.full(len(W.sigma), cfg.beta_sigma)])
    fam = cfg.penalty
    return np.concatenate([cfg.beta_w * np.atleast_1d(phi_derivative(fam, W.w)),
                           cfg.beta_sigma * np.atleast_1d(phi_derivative(fam, W.sigma))])


def upper_gradient(W: PlacementVector, sols: Sequence[LowerSolution],
                   adjoints: Sequence[BilevelAdjoint], training: Sequence['TrainingPair'],
                   cfg: UpperConfig, model: ParabolicModel, mode: str='linear') -> np.ndarray:
    '''
    Gradient of the reduced upper cost, length n_s + n_T:

        dF/dw_k     = beta_w (1 | phi'(w_k)) - sum_j sum_steps tau sum_i sigma_i rho_i zeta_j (y_j - z_oj)
        dF/dsigma_i = beta_sigma (1 | phi'(sigma_i)) - sum_j sum_steps tau sum_k w_k rho_i zeta_j (y_j - z_oj)
    '''
    if not len(sols) == len(adjoints) == len(training):
        raise ShapeError('lower solutions, adjoints and training pairs must have equal length')

    E = misfit_tensor(sols, adjoints, training, model)
    R = model.R
    data_w = -E @ (R.T @ W.sigma)
    data_sigma = -R @ (E.T @ W.w)
    return penalty_gradient(W, cfg, mode) + np.concatenate([data_w, data_sigma])


@dataclass
class Evaluation:
    W: PlacementVector
    cost: float
    sols: List[LowerSolution]


class BilevelProblem:
    '''
    Binds a model, a training set and an UpperConfig; evaluates the reduced upper cost and its
    gradient, re-solving every lower-level problem at the requested placement.
    '''

    def __init__(self, model: ParabolicModel, training: Sequence['TrainingPair'], cfg: UpperConfig):
        if not training:
            raise ValueError('bilevel problem needs at least one training pair')
        self.model = model
        self.training = list(training)
        self.cfg = cfg
        self.counter = SolveCounter()
        self.lower_iterations: List[int] = []

    def solve_lower(self, W: PlacementVector,
                    warm: Optional[Sequence[np.ndarray]]=None) -> List[LowerSolution]:
        starts = warm if warm is not None else [None] * len(self.training)

        def solve(item):
            pair, u0 = item
            counter = SolveCounter()
            sol = assimilate(make_problem(self.model, pair, W, self.cfg), u_init=u0,
                             opts=self.cfg.lower, counter=counter)
            return sol, counter

        results = pool_map(solve, list(zip(self.training, starts)))
        for _, counter in results:
            self.counter.add(counter)
        sols = [sol for sol, _ in results]
        self.lower_iterations = [sol.iterations for sol in sols]
        return sols

    def evaluate(self, W: PlacementVector, mode: str,
                 warm: Optional[Sequence[np.ndarray]]=None) -> Evaluation:
        sols = self.solve_lower(W, warm)
        return Evaluation(W=W, cost=upper_cost(W, sols, self.training, self.cfg, self.model, mode), sols=sols)

    def adjoints(self, W: PlacementVector, sols: Sequence[LowerSolution],
                 previous: Optional[Sequence[BilevelAdjoint]]=None) -> List[BilevelAdjoint]:
        guesses = [a.tau for a in previous] if previous is not None else [None] * len(sols)

        def solve(item):
            sol, pair, tau0 = item
            counter = SolveCounter()
            adj = solve_bilevel_adjoint(sol, pair, W, self.cfg, self.model, tau0=tau0, counter=counter)
            return adj, counter

        results = pool_map(solve, list(zip(sols, self.training, guesses)))
        for _, counter in results:
            self.counter.add(counter)
        return [adj for adj, _ in results]

    def gradient(self, evaluation: Evaluation, mode: str,
                 previous: Optional[Sequence[BilevelAdjoint]]=None):
        adjs = self.adjoints(evaluation.W, evaluation.sols, previous)
        grad = upper_gradient(evaluation.W, evaluation.sols, adjs, self.training, self.cfg, self.model, mode)
        return grad, adjs
