'''
Two-stage projected BFGS driver for the optimal placement of sensors and observation windows.

Stage 1 uses the linear penalty beta_w sum(w) + beta_sigma sum(sigma); stage 2 restarts from
the stage-1 placement with the sparsity enforcing penalty, which pushes entries to {0, 1}.
Every outer iteration re-assimilates all training pairs (warm started from the previous
reconstructions), solves the coupled adjoints, and takes a projected quasi-Newton step built on
epsilon-active sets.
'''

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from daplace.exceptions import LineSearchError
from daplace.pde.solvers import ParabolicModel
from daplace.placement.bilevel import (BilevelAdjoint, BilevelProblem, Evaluation,
                                       PlacementVector, UpperConfig)
from daplace.placement.projected_bfgs import (KKTMultipliers, armijo_project, epsilon_active_set,
                                              kkt_extract, projected_gradient_norm,
                                              reduced_bfgs_update, restriction, search_direction)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IterationRecord:
    stage: int
    iteration: int
    cost: float
    norm_w: float
    norm_sigma: float
    n_active: int
    projected_gradient: float
    step: float
    da_iterations: int
    pde_solves: int


@dataclass
class StageResult:
    W: PlacementVector
    initial_cost: float
    cost: float
    iterations: int
    converged: bool
    status: str
    # max lower-level iterations over the pairs at the stage's starting placement
    initial_da_iterations: int = 0


@dataclass
class PlacementResult:
    '''
    Final placement with its KKT multipliers (sparsity mode gradient) and the per-iteration
    history of both stages.
    '''
    W: PlacementVector
    kkt: KKTMultipliers
    history: List[IterationRecord]
    stages: List[StageResult]
    J0: float
    J_end: float
    da_iterations: int
    pde_solves: int
    elliptic_solves: int
    sols: list = field(default_factory=list, repr=False)

    @property
    def iterations(self) -> int:
        return sum(stage.iterations for stage in self.stages)

    @property
    def converged(self) -> bool:
        # stage 1 only initializes stage 2, a stalled stage 1 is handed over as is
        return self.stages[-1].converged

    def __iter__(self):
        # unpacks as (W_final, kkt, history)
        return iter((self.W, self.kkt, self.history))


class _CostOracle:
    '''
    Reduced upper cost as a function of the flat placement; remembers the evaluations so an
    accepted Armijo trial does not need to be re-assimilated.
    '''

    def __init__(self, problem: BilevelProblem, n_s: int, mode: str, warm: Sequence[np.ndarray]):
        self.problem = problem
        self.n_s = n_s
        self.mode = mode
        self.warm = list(warm)
        self.cache: Dict[bytes, Evaluation] = {}

    def evaluation(self, W_flat: np.ndarray) -> Evaluation:
        key = W_flat.tobytes()
        if key not in self.cache:
            W = PlacementVector.from_flat(W_flat, self.n_s)
            self.cache[key] = self.problem.evaluate(W, self.mode, warm=self.warm)
        return self.cache[key]

    def __call__(self, W_flat: np.ndarray) -> float:
        return self.evaluation(W_flat).cost

    def accept(self, evaluation: Evaluation) -> None:
        self.warm = [sol.u for sol in evaluation.sols]
        self.cache = {evaluation.W.flat.tobytes(): evaluation}


def _reduced_matrix(B: np.ndarray, inactive: np.ndarray) -> np.ndarray:
    n = B.shape[0]
    R = restriction(n, inactive)
    B_red = R @ B @ R
    # indices freed since the last update re-enter with unit curvature
    freed = inactive[np.all(B[inactive] == 0.0, axis=1)] if len(inactive) else inactive
    B_red[freed, freed] = 1.0
    return B_red


def _line_search(F: _CostOracle, W: np.ndarray, grad: np.ndarray, B_red: np.ndarray,
                 active: np.ndarray, inactive: np.ndarray, grad_norm0: float, gamma_hat: float,
                 F_W: float) -> Tuple[float, np.ndarray, np.ndarray]:
    '''
    Projected Armijo search along d = -R_A grad - B_red grad. A rejected or non-descent
    quasi-Newton direction is replaced once by the reduced steepest-descent direction.

    Returns
    -------
    (alpha, W_next, B_used): tuple
        B_used is the reduced matrix the accepted direction was built from.
    '''
    d = search_direction(B_red, grad, active)
    if grad @ d < 0.0:
        try:
            return (*armijo_project(F, W, d, grad_norm0, gamma_hat, F_W=F_W), B_red)
        except LineSearchError:
            logger.debug('quasi-Newton direction rejected, retrying along steepest descent')

    R = restriction(len(W), inactive)
    d = search_direction(R, grad, active)
    return (*armijo_project(F, W, d, grad_norm0, gamma_hat, F_W=F_W), R)


def _stalled(costs: List[float], window: int, rtol: float) -> bool:
    if len(costs) <= window:
        return False
    return costs[-window - 1] - costs[-1] <= rtol * max(abs(costs[-1]), np.finfo(float).tiny)


def _run_stage(problem: BilevelProblem, stage: int, mode: str, W0: PlacementVector,
               warm: Optional[Sequence[np.ndarray]], history: List[IterationRecord]
               ) -> Tuple[StageResult, Evaluation, np.ndarray, List[BilevelAdjoint]]:
    cfg = problem.cfg
    n_s = W0.n_s
    starts = warm if warm is not None else [None] * len(problem.training)
    F = _CostOracle(problem, n_s, mode, starts)

    current = F.evaluation(W0.flat)
    F.accept(current)
    initial_cost = current.cost
    initial_da = max(problem.lower_iterations)
    grad, adjs = problem.gradient(current, mode)
    grad_norm0 = float(np.linalg.norm(grad))
    W = current.W.flat
    B = np.eye(len(W))
    converged, status = False, 'max_iter'
    costs = [current.cost]
    it = 0

    while it < cfg.max_iter:
        pg = projected_gradient_norm(W, grad)
        if pg <= cfg.tol:
            converged, status = True, 'converged'
            break

        active, inactive = epsilon_active_set(W, grad, eps_k=min(cfg.eps_active_max, pg))
        try:
            alpha, W_new, B_red = _line_search(F, W, grad, _reduced_matrix(B, inactive), active, inactive,
                                               grad_norm0, cfg.gamma_hat, current.cost)
        except LineSearchError:
            if stage == 1:
                raise
            logger.warning('stage %i line search failed at iteration %i, keeping last iterate', stage, it)
            status = 'line_search_failed'
            break

        if alpha == 0.0:
            converged, status = True, 'stationary'
            break

        new = F.evaluation(W_new)
        F.accept(new)
        grad_new, adjs = problem.gradient(new, mode, previous=adjs)
        B = reduced_bfgs_update(B_red, W, W_new, grad, grad_new, inactive,
                                curvature_floor=cfg.curvature_floor)

        W, grad, current = W_new, grad_new, new
        it += 1
        Wp = current.W
        history.append(IterationRecord(stage=stage, iteration=it, cost=current.cost,
                                       norm_w=float(np.sum(Wp.w)), norm_sigma=float(np.sum(Wp.sigma)),
                                       n_active=len(active), projected_gradient=pg, step=alpha,
                                       da_iterations=max(problem.lower_iterations),
                                       pde_solves=problem.counter.parabolic))
        logger.info('stage %i iteration %i: cost %.6e, |w| %.4g, |sigma| %.4g, active %i',
                    stage, it, current.cost, history[-1].norm_w, history[-1].norm_sigma, len(active))

        costs.append(current.cost)
        if _stalled(costs, cfg.stall_window, cfg.stall_rtol):
            logger.warning('stage %i stalled: cost decreased by less than %.1e (relative) over %i iterations',
                           stage, cfg.stall_rtol, cfg.stall_window)
            status = 'stalled'
            break

    result = StageResult(W=current.W, initial_cost=initial_cost, cost=current.cost, iterations=it,
                         converged=converged, status=status, initial_da_iterations=initial_da)
    logger.info('stage %i (%s penalty) %s after %i iterations, cost %.6e -> %.6e',
                stage, mode, status, it, initial_cost, current.cost)
    return result, current, grad, adjs


def optimize_placement(training: Sequence, model: ParabolicModel, cfg: UpperConfig,
                       W0: Optional[PlacementVector]=None) -> PlacementResult:
    '''
    Runs both stages of the projected BFGS placement optimization.

    Parameters
    ----------
    training: Sequence[TrainingPair]
        nonempty training set.
    model: ParabolicModel
    cfg: UpperConfig
    W0: PlacementVector
        initial placement. Default is all ones.

    Returns
    -------
    result: PlacementResult
        unpacks as (W_final, kkt, history).

    Raises
    ------
    ValueError
        if the training set is empty.
    LineSearchError, NumericalError
        propagated from stage 1; stage-2 line search failures are recorded in the stage status.
    '''
    problem = BilevelProblem(model, training, cfg)
    if W0 is None:
        W0 = PlacementVector.ones(model.grid.n_s, model.tg.n_T)

    history: List[IterationRecord] = []
    stage1, eval1, _, _ = _run_stage(problem, 1, 'linear', W0, None, history)
    stage2, eval2, grad2, _ = _run_stage(problem, 2, 'sparsity', stage1.W,
                                         [sol.u for sol in eval1.sols], history)
    kkt = kkt_extract(stage2.W.flat, grad2)
    logger.info('placement finished: %i + %i iterations, KKT residual %.3e',
                stage1.iterations, stage2.iterations, kkt.residual)

    return PlacementResult(W=stage2.W, kkt=kkt, history=history, stages=[stage1, stage2],
                           J0=stage1.initial_cost, J_end=eval2.cost,
                           da_iterations=stage1.initial_da_iterations,
                           pde_solves=problem.counter.parabolic,
                           elliptic_solves=problem.counter.elliptic, sols=eval2.sols)
