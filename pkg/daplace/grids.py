'''
Spatial and temporal discretization of the unit square and of the assimilation window [0,1].

The spatial grid carries the sensor candidates, the time grid carries both the implicit Euler
steps (tau = 1/(n+1)) and the n+2 observation subintervals, which partition [0,1] evenly. The
C^2 bumps rho_i localise observations to subinterval i.
'''

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial import KDTree

from daplace.exceptions import (DuplicateSensorError, InvalidDimensionError,
                                OutOfDomainError)

# distances closer than this count as ties in nearest_node
_TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    '''
    Uniform m x m node set on [0,1]^2. Node k sits at (ix*h, iy*h) with k = iy*m + ix.
    '''
    m: int
    h: float
    nodes: np.ndarray
    candidate_ids: np.ndarray
    tree: KDTree = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.m * self.m

    @property
    def n_s(self) -> int:
        return len(self.candidate_ids)

    @property
    def interior(self) -> np.ndarray:
        '''indices of the nodes not on the boundary of the square'''
        ix = np.arange(self.n_nodes) % self.m
        iy = np.arange(self.n_nodes) // self.m
        mask = (ix > 0) & (ix < self.m - 1) & (iy > 0) & (iy < self.m - 1)
        return np.flatnonzero(mask)

    @property
    def boundary(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_nodes), self.interior)

    @property
    def observable_candidates(self) -> np.ndarray:
        '''
        positions in the candidate list of the sensors on interior nodes; a boundary sensor
        always reads the Dirichlet value 0 and carries no information
        '''
        return np.flatnonzero(np.isin(self.candidate_ids, self.interior))

    def coords(self, k: int) -> np.ndarray:
        return self.nodes[k]

    def sample(self, func) -> np.ndarray:
        '''evaluates func(x, y) on every node'''
        return np.asarray(func(self.nodes[:, 0], self.nodes[:, 1]), dtype=float)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    '''
    n interior steps: the implicit Euler times are t_k = k*tau, k = 0..n+1, tau = 1/(n+1).
    Observation subintervals are the n_T = n+2 equal pieces of [0, 1].
    '''
    n: int
    tau: float
    n_T: int
    subintervals: np.ndarray
    T: float = 1.0

    @property
    def n_steps(self) -> int:
        '''number of implicit Euler steps, excluding t=0'''
        return self.n + 1

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.n_steps + 1)

    def mollifier_matrix(self) -> np.ndarray:
        '''
        Returns R with R[i, k] = rho_i(t_k), shape (n_T, n_steps+1). Column 0 (t=0) is kept for
        alignment with space-time arrays and never enters a quadrature.
        '''
        R = np.zeros((self.n_T, self.n_steps + 1))
        for i in range(self.n_T):
            for k, t in enumerate(self.times):
                R[i, k] = mollifier_value(self, i, t)
        return R


def build_spatial_grid(m: int, points: Optional[Sequence[Sequence[float]]]=None) -> SpatialGrid:
    '''
    Builds the uniform grid on the unit square and resolves the sensor candidates.

    Parameters
    ----------
    m: int
        nodes per dimension, spacing h = 1/(m-1).
    points: Optional[Sequence]
        None selects every node as a candidate (n_s = m^2). Otherwise each (x, y) point is
        snapped to its nearest node.

    Returns
    -------
    grid: SpatialGrid

    Raises
    ------
    InvalidDimensionError
        if m < 2.
    OutOfDomainError
        if a point lies outside [0,1]^2.
    DuplicateSensorError
        if two points snap to the same node.
    '''
    if m < 2:
        raise InvalidDimensionError(f'grid needs at least 2 nodes per dimension, got m={m}')

    h = 1.0 / (m - 1)
    ix, iy = np.meshgrid(np.arange(m), np.arange(m))
    nodes = np.column_stack([ix.ravel() * h, iy.ravel() * h])
    grid = SpatialGrid(m=m, h=h, nodes=nodes, candidate_ids=np.arange(m * m), tree=KDTree(nodes))

    if points is None:
        return grid

    ids = [nearest_node(grid, p) for p in points]
    if len(set(ids)) != len(ids):
        raise DuplicateSensorError(f'candidate points snap to repeated nodes: {ids}')

    return SpatialGrid(m=m, h=h, nodes=nodes, candidate_ids=np.array(ids, dtype=int), tree=grid.tree)


def build_time_grid(n: int) -> TimeGrid:
    '''
    Builds the implicit Euler step tau = 1/(n+1) and the n+2 observation subintervals.

    Raises
    ------
    InvalidDimensionError
        if n < 1.
    '''
    if n < 1:
        raise InvalidDimensionError(f'time grid needs n >= 1, got n={n}')

    n_T = n + 2
    edges = np.linspace(0.0, 1.0, n_T + 1)
    return TimeGrid(n=n, tau=1.0 / (n + 1), n_T=n_T,
                    subintervals=np.column_stack([edges[:-1], edges[1:]]))


def mollifier_value(tg: TimeGrid, i: int, t: float) -> float:
    '''
    rho_i(t) = 64 s^3 (1-s)^3 with s the position of t inside subinterval i, zero outside.
    The bump is C^2 across the subinterval ends and peaks at 1 in the midpoint.

    Raises
    ------
    IndexError
        if i is not a subinterval index.
    '''
    if not 0 <= i < tg.n_T:
        raise IndexError(f'subinterval index {i} outside 0..{tg.n_T - 1}')

    t_start, t_end = tg.subintervals[i]
    s = (t - t_start) / (t_end - t_start)
    if s <= 0.0 or s >= 1.0:
        return 0.0
    return 64.0 * s**3 * (1.0 - s)**3


def nearest_node(grid: SpatialGrid, p: Union[Sequence[float], np.ndarray]) -> int:
    '''
    Index of the node closest to p; among equidistant nodes the lowest index wins.

    Raises
    ------
    OutOfDomainError
        if p is outside the unit square.
    '''
    p = np.asarray(p, dtype=float)
    if p.shape != (2,) or np.any(p < 0.0) or np.any(p > 1.0):
        raise OutOfDomainError(f'point {p.tolist()} is outside the unit square')

    k = min(4, grid.n_nodes)
    dists, inds = grid.tree.query(p, k=k)
    dists, inds = np.atleast_1d(dists), np.atleast_1d(inds)
    ties = inds[dists <= dists.min() + _TIE_TOL]
    return int(ties.min())
