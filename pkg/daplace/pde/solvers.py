'''
Finite difference solvers for the semilinear parabolic model

    dy/dt + A y + g(y) = f,   y = 0 on the boundary,   y(0) = u,

with A = -kappa * Laplacian (5-point stencil) and implicit Euler in time. Next to the Newton
forward solve this module holds the linearized forward solve, the exact discrete adjoint of the
scheme (backward march with nodal point sources) and the elliptic solve used for gradients.

Array conventions: spatial fields have shape (m*m,), space-time fields (n_steps+1, m*m); only
interior nodes carry unknowns, boundary entries are kept at zero.
'''

import logging
import threading
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from daplace.constants import NEWTON_MAX_ITER, NEWTON_TOL
from daplace.exceptions import NewtonConvergenceError, ParameterError, ShapeError
from daplace.grids import SpatialGrid, TimeGrid
from daplace.pde.nonlinearity import Nonlinearity

logger = logging.getLogger(__name__)


@dataclass
class SolveCounter:
    '''
    Tally of PDE solves. One forward or one backward parabolic solve counts 1 each, elliptic
    solves are counted separately. newton_max is the largest Newton iteration count of any
    implicit Euler step.
    '''
    forward: int = 0
    backward: int = 0
    elliptic: int = 0
    newton_max: int = 0

    @property
    def parabolic(self) -> int:
        return self.forward + self.backward

    def add(self, other: 'SolveCounter') -> None:
        self.forward += other.forward
        self.backward += other.backward
        self.elliptic += other.elliptic
        self.newton_max = max(self.newton_max, other.newton_max)


def laplacian_1d(n: int, h: float) -> sparse.csr_matrix:
    return sparse.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / h**2


class ParabolicModel:

    def __init__(self, grid: SpatialGrid, tg: TimeGrid,
                 nl: Optional[Nonlinearity]=None,
                 kappa: float=1.0,
                 newton_tol: float=NEWTON_TOL,
                 newton_max_iter: int=NEWTON_MAX_ITER) -> None:
        '''
        Assembles the discrete operators for a grid pair.

        Parameters
        ----------
        grid: SpatialGrid
        tg: TimeGrid
        nl: Nonlinearity
            reaction term g. Default is the smoothed absolute value with eps_reg = 0.1.
        kappa: float
            scalar diffusion coefficient, A = -kappa * Laplacian.
        '''
        if kappa <= 0:
            raise ParameterError(f'diffusion coefficient must be positive, got {kappa}')

        self.grid = grid
        self.tg = tg
        self.nl = nl if nl is not None else Nonlinearity()
        self.kappa = kappa
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter

        self.interior = grid.interior
        n_int = grid.m - 2
        if n_int > 0:
            T = laplacian_1d(n_int, grid.h)
            I1 = sparse.identity(n_int)
            self.L = (sparse.kron(I1, T) + sparse.kron(T, I1)).tocsc()
        else:
            self.L = sparse.csc_matrix((0, 0))
        self.A = (kappa * self.L).tocsc()
        self.I = sparse.identity(self.A.shape[0], format='csc')

        # observation operator: sensor s -> interior unknown, boundary sensors map to nothing
        node_to_interior = -np.ones(grid.n_nodes, dtype=int)
        node_to_interior[self.interior] = np.arange(len(self.interior))
        cols = node_to_interior[grid.candidate_ids]
        rows = np.flatnonzero(cols >= 0)
        self.P = sparse.csr_matrix((np.ones(len(rows)), (rows, cols[rows])),
                                   shape=(grid.n_s, len(self.interior)))

        # R[i, k] = rho_i(t_k)
        self.R = tg.mollifier_matrix()

        self._elliptic_cache = {}
        self._lock = threading.Lock()

    # ------------------------------------------------------------------ helpers

    @property
    def n_steps(self) -> int:
        return self.tg.n_steps

    @property
    def field_shape(self) -> Tuple[int, int]:
        return (self.n_steps + 1, self.grid.n_nodes)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.field_shape)

    def inner_h(self, a: np.ndarray, b: np.ndarray) -> float:
        '''discrete L2(Omega) inner product'''
        return float(self.grid.h**2 * np.dot(a, b))

    def norm_h(self, a: np.ndarray) -> float:
        return float(np.sqrt(self.inner_h(a, a)))

    def inner_ht(self, a: np.ndarray, b: np.ndarray) -> float:
        '''discrete L2(Q) inner product, rectangle rule over the steps k >= 1'''
        return float(self.tg.tau * self.grid.h**2 * np.sum(a[1:] * b[1:]))

    def norm_ht(self, a: np.ndarray) -> float:
        return float(np.sqrt(self.inner_ht(a, a)))

    def apply_A(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        out[self.interior] = self.A @ v[self.interior]
        return out

    def apply_neg_laplacian(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        out[self.interior] = self.L @ v[self.interior]
        return out

    def energy_h(self, v: np.ndarray) -> float:
        '''||grad_h v||^2 in the discrete L2 norm, equal to h^2 v^T (-Laplacian_h) v for Dirichlet fields'''
        return self.inner_h(v, self.apply_neg_laplacian(v))

    def observe(self, y: np.ndarray) -> np.ndarray:
        '''nodal values of y at the sensor candidates, shape (n_s, n_steps+1)'''
        return y[:, self.grid.candidate_ids].T.copy()

    def _check_spatial(self, v: np.ndarray, name: str) -> None:
        if v.shape != (self.grid.n_nodes,):
            raise ShapeError(f'{name} has shape {v.shape}, expected ({self.grid.n_nodes},)')

    def _check_space_time(self, v: np.ndarray, name: str) -> None:
        if v.shape != self.field_shape:
            raise ShapeError(f'{name} has shape {v.shape}, expected {self.field_shape}')

    def _step_matrix(self, y_k: np.ndarray) -> sparse.csc_matrix:
        '''I + tau*A + tau*diag(g'(y_k)) on the interior unknowns'''
        dg = self.nl.derivative(y_k)
        assert np.all(dg >= 0.0), 'monotone nonlinearity violated'
        tau = self.tg.tau
        return (self.I + tau * self.A + tau * sparse.diags(dg)).tocsc()

    def _solve_step(self, y_k: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        if rhs.size == 0:
            return rhs.copy()
        return spla.spsolve(self._step_matrix(y_k), rhs)

    # ------------------------------------------------------------------ solvers

    def solve_forward(self, u0: np.ndarray, forcing: Optional[np.ndarray]=None,
                      counter: Optional[SolveCounter]=None) -> np.ndarray:
        '''
        Implicit Euler march of the semilinear equation, each step solved by plain Newton:

            (I + tau A) y^k + tau g(y^k) = y^{k-1} + tau f^k.

        Parameters
        ----------
        u0: np.ndarray
            initial condition, zero on the boundary.
        forcing: np.ndarray
            space-time right-hand side f. Default is zero.

        Returns
        -------
        y: np.ndarray
            space-time state with y[0] = u0.

        Raises
        ------
        NewtonConvergenceError
            if a step does not reach the residual tolerance in newton_max_iter iterations.
        '''
        self._check_spatial(u0, 'initial condition')
        if np.max(np.abs(u0[self.grid.boundary]), initial=0.0) > 1e-12:
            raise ParameterError('initial condition must vanish on the boundary')
        if forcing is not None:
            self._check_space_time(forcing, 'forcing')

        tau = self.tg.tau
        y = self.zeros()
        y[0, self.interior] = u0[self.interior]
        K = self.I + tau * self.A

        for k in range(1, self.n_steps + 1):
            b = y[k - 1, self.interior].copy()
            if forcing is not None:
                b += tau * forcing[k, self.interior]
            yk = y[k - 1, self.interior].copy()

            for it in range(self.newton_max_iter + 1):
                res = K @ yk + tau * self.nl.value(yk) - b
                res_norm = np.max(np.abs(res), initial=0.0)
                if res_norm <= self.newton_tol:
                    break
                if it == self.newton_max_iter or not np.isfinite(res_norm):
                    logger.warning('Newton did not converge after %i iterations, error is %s', it, res_norm)
                    raise NewtonConvergenceError(k, float(res_norm))
                yk = yk - self._solve_step(yk, res)

            y[k, self.interior] = yk
            if counter is not None:
                counter.newton_max = max(counter.newton_max, it)

        if counter is not None:
            counter.forward += 1
        return y

    def solve_linearized_forward(self, y: np.ndarray, h0: np.ndarray,
                                 counter: Optional[SolveCounter]=None) -> np.ndarray:
        '''
        Implicit Euler discretization of d(eta)/dt + A eta + g'(y) eta = 0, eta(0) = h0: the
        derivative of solve_forward with respect to its initial condition in direction h0.
        '''
        self._check_space_time(y, 'state')
        self._check_spatial(h0, 'direction')

        eta = self.zeros()
        eta[0, self.interior] = h0[self.interior]
        for k in range(1, self.n_steps + 1):
            eta[k, self.interior] = self._solve_step(y[k, self.interior], eta[k - 1, self.interior])

        if counter is not None:
            counter.forward += 1
        return eta

    def solve_adjoint_backward(self, y: np.ndarray,
                               nodal_source: Optional[np.ndarray]=None,
                               volumetric_source: Optional[np.ndarray]=None,
                               zeta_coupling: Optional[Tuple[np.ndarray, np.ndarray]]=None,
                               counter: Optional[SolveCounter]=None) -> np.ndarray:
        '''
        Exact transpose of the linearized implicit Euler scheme, marched backward from q = 0
        after the final step:

            M_k q^k = q^{k+1} + tau * (P^T s^k / h^2 + v^k - g''(y^k) p^k zeta^k),

        with M_k = I + tau A + tau diag(g'(y^k)). Nodal sources act as Dirac masses of weight
        1/h^2 at the sensor nodes. q[0] holds the sensitivity with respect to y(0), equal to q^1.

        Parameters
        ----------
        y: np.ndarray
            forward state the scheme was linearized at.
        nodal_source: np.ndarray
            per-(sensor, time index) values, shape (n_s, n_steps+1).
        volumetric_source: np.ndarray
            space-time source.
        zeta_coupling: tuple
            (p, zeta) pair adding the second order term -g''(y) p zeta.

        Returns
        -------
        q: np.ndarray
            space-time adjoint.
        '''
        self._check_space_time(y, 'state')
        if nodal_source is not None and nodal_source.shape != (self.grid.n_s, self.n_steps + 1):
            raise ShapeError(f'nodal source has shape {nodal_source.shape}, '
                             f'expected ({self.grid.n_s}, {self.n_steps + 1})')
        if volumetric_source is not None:
            self._check_space_time(volumetric_source, 'volumetric source')
        if zeta_coupling is not None:
            self._check_space_time(zeta_coupling[0], 'coupling adjoint')
            self._check_space_time(zeta_coupling[1], 'coupling direction')

        tau, h2 = self.tg.tau, self.grid.h**2
        q = self.zeros()
        q_next = np.zeros(len(self.interior))

        for k in range(self.n_steps, 0, -1):
            y_k = y[k, self.interior]
            src = np.zeros(len(self.interior))
            if nodal_source is not None:
                src += self.P.T @ nodal_source[:, k] / h2
            if volumetric_source is not None:
                src += volumetric_source[k, self.interior]
            if zeta_coupling is not None:
                p, zeta = zeta_coupling
                src -= self.nl.second_derivative(y_k) * p[k, self.interior] * zeta[k, self.interior]
            q_next = self._solve_step(y_k, q_next + tau * src)
            q[k, self.interior] = q_next

        q[0] = q[1]
        if counter is not None:
            counter.backward += 1
        return q

    def solve_elliptic(self, rhs: np.ndarray, theta: float, alpha: float,
                       counter: Optional[SolveCounter]=None) -> np.ndarray:
        '''
        Solves -theta*Laplacian_h v + alpha*v = rhs with homogeneous Dirichlet conditions
        (sparse LU, factorization cached per (theta, alpha)).

        Raises
        ------
        ParameterError
            if theta or alpha is not positive.
        '''
        if theta <= 0 or alpha <= 0:
            raise ParameterError(f'elliptic solve needs theta > 0 and alpha > 0, got {theta}, {alpha}')
        self._check_spatial(rhs, 'elliptic right-hand side')

        v = np.zeros(self.grid.n_nodes)
        if len(self.interior) > 0:
            v[self.interior] = self._elliptic_solver(theta, alpha)(rhs[self.interior])
        if counter is not None:
            counter.elliptic += 1
        return v

    def _elliptic_solver(self, theta: float, alpha: float):
        key = (theta, alpha)
        with self._lock:
            if key not in self._elliptic_cache:
                op = theta * self.L + alpha * self.I
                self._elliptic_cache[key] = spla.factorized(op.tocsc())
            return self._elliptic_cache[key]
