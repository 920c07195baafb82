'''
Building blocks of the projected BFGS method on the box [0, 1]^n: epsilon-active sets, the
reduced inverse BFGS update, the descent direction, the projected Armijo search and the KKT
multipliers of the bound constraints.
'''

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from daplace.constants import CURVATURE_SKIP, EPS_ACTIVE_MAX, MAX_ARMIJO_TRIALS
from daplace.exceptions import LineSearchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KKTMultipliers:
    lam_a: np.ndarray
    lam_b: np.ndarray
    residual: float


def project(W: np.ndarray) -> np.ndarray:
    '''componentwise clamp onto [0, 1]'''
    return np.clip(W, 0.0, 1.0)


def projected_gradient_norm(W: np.ndarray, grad: np.ndarray) -> float:
    return float(np.linalg.norm(W - project(W - grad)))


def epsilon_active_set(W: np.ndarray, grad: np.ndarray,
                       eps_k: Optional[float]=None,
                       eps_max: float=EPS_ACTIVE_MAX) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Splits the indices into the epsilon-active set A = {i : W_i <= eps_k or W_i >= 1 - eps_k}
    and its complement I.

    Parameters
    ----------
    W: np.ndarray
        feasible iterate.
    grad: np.ndarray
        gradient at W, used for eps_k = min(eps_max, ||W - P(W - grad)||) when eps_k is None.
    eps_k: float

    Returns
    -------
    (active, inactive): tuple[np.ndarray, np.ndarray]
        sorted index arrays.
    '''
    if eps_k is None:
        eps_k = min(eps_max, projected_gradient_norm(W, grad))
    mask = (W <= eps_k) | (W >= 1.0 - eps_k)
    return np.flatnonzero(mask), np.flatnonzero(~mask)


def restriction(n: int, inds: np.ndarray) -> np.ndarray:
    '''diagonal 0/1 matrix R_S keeping the entries listed in inds'''
    R = np.zeros((n, n))
    R[inds, inds] = 1.0
    return R


def reduced_bfgs_update(B: np.ndarray, W_old: np.ndarray, W_new: np.ndarray,
                        grad_old: np.ndarray, grad_new: np.ndarray,
                        inactive: np.ndarray, curvature_floor: float=0.0) -> np.ndarray:
    '''
    Inverse BFGS update restricted to the epsilon-inactive subspace:

        B+ = (I - s y^T / y^T s) R B R (I - y s^T / y^T s) + s s^T / y^T s,

    with s = R (W_new - W_old), y = R (grad_new - grad_old). If y^T s <= 1e-12 ||s|| ||y|| the
    update is skipped and the restricted identity R is returned.

    Parameters
    ----------
    curvature_floor: float
        with c = curvature_floor > 0, y is damped to y + (c - y^T s / s^T s) s whenever
        y^T s < c s^T s, which keeps the curvature seen along s at least c.
    '''
    n = len(W_old)
    R = restriction(n, inactive)
    s = R @ (W_new - W_old)
    y = R @ (grad_new - grad_old)
    ys = float(y @ s)
    ss = float(s @ s)

    if curvature_floor > 0.0 and 0.0 < ss and ys < curvature_floor * ss:
        y = y + (curvature_floor - ys / ss) * s
        ys = curvature_floor * ss

    if ys <= CURVATURE_SKIP * np.linalg.norm(s) * np.linalg.norm(y):
        logger.debug('curvature condition failed (y^T s = %.3e), resetting reduced matrix', ys)
        return R

    V = np.eye(n) - np.outer(s, y) / ys
    B_new = V @ (R @ B @ R) @ V.T + np.outer(s, s) / ys
    return 0.5 * (B_new + B_new.T)


def search_direction(B: np.ndarray, grad: np.ndarray, active: np.ndarray) -> np.ndarray:
    '''d = -R_A grad - B grad, with B the reduced inverse Hessian approximation'''
    d = -(B @ grad)
    d[active] -= grad[active]
    return d


def armijo_project(F: Callable[[np.ndarray], float], W: np.ndarray, d: np.ndarray,
                   grad_norm_at_start: float, gamma_hat: float,
                   F_W: Optional[float]=None,
                   max_trials: int=MAX_ARMIJO_TRIALS) -> Tuple[float, np.ndarray]:
    '''
    Modified Armijo rule along the projection arc: the largest

        alpha in {1 / (2^i ||grad F(W_0)||) : i = 0, 1, ...}

    with F(P(W + alpha d)) - F(W) <= -(gamma_hat / alpha) ||P(W + alpha d) - W||^2.

    Returns
    -------
    (alpha, W_next): tuple
        alpha = 0 and W_next = W when the projected step vanishes (W is a stationary clamped
        point), which callers treat as convergence.

    Raises
    ------
    LineSearchError
        after max_trials rejected trial steps.
    '''
    if grad_norm_at_start <= 0.0:
        return 0.0, W.copy()

    f0 = F(W) if F_W is None else F_W
    alpha = 1.0 / grad_norm_at_start

    for i in range(max_trials):
        W_trial = project(W + alpha * d)
        step = W_trial - W
        if i == 0 and not np.any(step):
            return 0.0, W.copy()
        step_sq = float(step @ step)
        if step_sq > 0.0 and F(W_trial) - f0 <= -(gamma_hat / alpha) * step_sq:
            return alpha, W_trial
        alpha *= 0.5

    raise LineSearchError(f'projected Armijo search rejected {max_trials} trial steps')


def kkt_extract(W: np.ndarray, grad: np.ndarray) -> KKTMultipliers:
    '''
    lam_a = max(0, grad), lam_b = |min(0, grad)|; the residual is the largest violation of
    lam_a * W = 0 and lam_b * (1 - W) = 0.
    '''
    lam_a = np.maximum(0.0, grad)
    lam_b = np.abs(np.minimum(0.0, grad))
    residual = max(float(np.max(np.abs(lam_a * W), initial=0.0)),
                   float(np.max(np.abs(lam_b * (1.0 - W)), initial=0.0)))
    return KKTMultipliers(lam_a=lam_a, lam_b=lam_b, residual=residual)
