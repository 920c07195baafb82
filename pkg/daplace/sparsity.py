'''
Sparsity enforcing penalty family Phi_eps(x) = sum_i phi_eps(x_i), a C^1 concave surrogate of
the counting norm on [0,1]:

    phi_eps(x) = x/eps          0 <= x <= eps/2
                 pi_eps(x)      eps/2 < x <= 2 eps
                 1              2 eps < x <= 1

with pi_eps(x) = a x^3 + b x^2 + c x + e the cubic matching value and slope at both breakpoints.
'''

from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy.linalg import solve

from daplace.exceptions import OutOfDomainError, ParameterError

ArrayLike = Union[float, np.ndarray]


@lru_cache(maxsize=None)
def pi_coefficients(eps: float) -> Tuple[float, float, float, float]:
    '''
    Solves the 4x4 system pi(eps/2) = 1/2, pi(2 eps) = 1, pi'(eps/2) = 1/eps, pi'(2 eps) = 0.

    Returns
    -------
    (a, b, c, e): tuple
        cubic coefficients, highest degree first.

    Raises
    ------
    ParameterError
        unless 0 < eps <= 1/2.
    '''
    if not 0.0 < eps <= 0.5:
        raise ParameterError(f'penalty parameter must satisfy 0 < eps <= 1/2, got {eps}')

    M = np.array([[eps**3 / 8, eps**2 / 4, eps / 2, 1.0],
                  [8 * eps**3, 4 * eps**2, 2 * eps, 1.0],
                  [3 * eps**2 / 4, eps, 1.0, 0.0],
                  [12 * eps**2, 4 * eps, 1.0, 0.0]])
    rhs = np.array([0.5, 1.0, 1.0 / eps, 0.0])
    coeffs = solve(M, rhs)

    residual = np.max(np.abs(M @ coeffs - rhs))
    assert residual <= 1e-12 * max(1.0, np.max(np.abs(rhs))), f'cubic bridge residual {residual}'
    return tuple(float(c) for c in coeffs)


@dataclass(frozen=True)
class PenaltyFamily:
    eps: float

    def __post_init__(self):
        pi_coefficients(self.eps)

    @property
    def coeffs(self) -> Tuple[float, float, float, float]:
        return pi_coefficients(self.eps)

    def pi(self, x: ArrayLike) -> ArrayLike:
        a, b, c, e = self.coeffs
        return ((a * x + b) * x + c) * x + e

    def pi_derivative(self, x: ArrayLike) -> ArrayLike:
        a, b, c, _ = self.coeffs
        return (3 * a * x + 2 * b) * x + c


def _check_domain(x: np.ndarray) -> None:
    if np.any(x < 0.0) or np.any(x > 1.0) or np.any(np.isnan(x)):
        raise OutOfDomainError(f'penalty argument outside [0, 1]: {x[(x < 0) | (x > 1)][:5]}')


def phi_value(fam: PenaltyFamily, x: ArrayLike) -> ArrayLike:
    '''phi_eps evaluated componentwise on [0, 1].'''
    xa = np.asarray(x, dtype=float)
    _check_domain(xa)
    eps = fam.eps
    out = np.where(xa <= eps / 2, xa / eps, np.where(xa <= 2 * eps, fam.pi(xa), 1.0))
    return float(out) if out.ndim == 0 else out


def phi_derivative(fam: PenaltyFamily, x: ArrayLike) -> ArrayLike:
    '''phi_eps' evaluated componentwise on [0, 1].'''
    xa = np.asarray(x, dtype=float)
    _check_domain(xa)
    eps = fam.eps
    out = np.where(xa <= eps / 2, 1.0 / eps, np.where(xa <= 2 * eps, fam.pi_derivative(xa), 0.0))
    return float(out) if out.ndim == 0 else out


def Phi_sum(fam: PenaltyFamily, v: np.ndarray) -> float:
    return float(np.sum(phi_value(fam, np.asarray(v, dtype=float))))
