'''
Training sets for the placement problem: clean initial conditions u_dag_j, their states
y_dag_j = S(u_dag_j) and the (possibly noisy) observations z_oj the lower level assimilates.
'''

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from daplace.assimilation import ObservationSeries, make_observations
from daplace.constants import __backgrounds__, __forcings__, __presets__
from daplace.exceptions import ParameterError
from daplace.pde.solvers import ParabolicModel

logger = logging.getLogger(__name__)

# phase offsets of the nine-variant training set
VARIANT_OFFSETS = (-0.1, 0.0, 0.1)


@dataclass(frozen=True, eq=False)
class TrainingPair:
    '''
    One element of the training set; y_dag is the forward solve of u_dag under forcing.
    '''
    u_dag: np.ndarray
    y_dag: np.ndarray
    z_o: ObservationSeries
    u_b: np.ndarray
    forcing: Optional[np.ndarray] = None


def reference_initial_condition(model: ParabolicModel, a: float=0.0, b: float=0.0,
                                jump: float=0.0) -> np.ndarray:
    '''sin(2 pi (x - a)) sin(2 pi (y - b)) + jump * 1{x > 1/2}, zero on the boundary'''
    grid = model.grid
    u = grid.sample(lambda x, y: np.sin(2 * np.pi * (x - a)) * np.sin(2 * np.pi * (y - b)))
    if jump != 0.0:
        u = u + jump * (grid.nodes[:, 0] > 0.5)
    u[grid.boundary] = 0.0
    return u


def default_forcing(model: ParabolicModel, c: float=0.0) -> np.ndarray:
    '''
    f(x, t) = (T - t) [sin(pi x_1) + c sin(pi x_2)] on the time steps, shape (n_steps+1, m*m).
    '''
    grid, tg = model.grid, model.tg
    x1, x2 = grid.nodes[:, 0], grid.nodes[:, 1]
    profile = np.sin(np.pi * x1) + c * np.sin(np.pi * x2)
    f = np.outer(tg.T - tg.times, profile)
    f[:, grid.boundary] = 0.0
    return f


def _pair_seeds(seed: int, n_pairs: int) -> List[int]:
    children = np.random.SeedSequence(seed).spawn(n_pairs)
    return [int(child.generate_state(1)[0]) for child in children]


def build_training_set(preset: str, n_pairs: int, seed: int, model: ParabolicModel,
                       sd: float=0.0, jump: float=0.0,
                       background: str='zero', forcing: str='default') -> List[TrainingPair]:
    '''
    Builds the training set of a preset.

    Parameters
    ----------
    preset: str
        'single': u_dag = sin(2 pi x) sin(2 pi y).
        'nine-variant': the nine phase shifts of u_dag on the offsets {-0.1, 0, 0.1}^2.
        'common-u': n_pairs pairs sharing u_dag, pair j forced by
        (T - t)[sin(pi x_1) + c_j sin(pi x_2)] with c_j = 0.5 j / max(n_pairs - 1, 1).
    n_pairs: int
        1 for 'single', 9 for 'nine-variant'.
    seed: int
        root seed; every pair draws its noise from an independent child seed.
    model: ParabolicModel
    sd: float
        observation noise standard deviation.
    jump: float
        height of the discontinuity added to every u_dag_j for x_1 > 1/2.
    background: str
        'zero' or 'truth' (u_b = u_dag_j).
    forcing: str
        'default' or 'zero'.

    Returns
    -------
    training: list[TrainingPair]

    Raises
    ------
    ValueError
        if preset, background or forcing are not supported.
    ParameterError
        if n_pairs does not match the preset.
    '''
    if preset not in __presets__:
        raise ValueError(f'training preset {preset} not supported.')
    if background not in __backgrounds__:
        raise ValueError(f'background {background} not supported.')
    if forcing not in __forcings__:
        raise ValueError(f'forcing {forcing} not supported.')

    expected = {'single': 1, 'nine-variant': 9}.get(preset)
    if (expected is not None and n_pairs != expected) or n_pairs < 1:
        raise ParameterError(f'preset {preset} cannot build {n_pairs} training pairs')

    if preset == 'nine-variant':
        offsets = list(itertools.product(VARIANT_OFFSETS, repeat=2))
    else:
        offsets = [(0.0, 0.0)] * n_pairs

    training = []
    for j, (seed_j, (a, b)) in enumerate(zip(_pair_seeds(seed, n_pairs), offsets)):
        u_dag = reference_initial_condition(model, a, b, jump)
        if forcing == 'zero':
            f = None
        elif preset == 'common-u':
            f = default_forcing(model, c=0.5 * j / max(n_pairs - 1, 1))
        else:
            f = default_forcing(model)

        y_dag = model.solve_forward(u_dag, f)
        z_o = make_observations(y_dag, model, sd, seed=seed_j)
        u_b = u_dag.copy() if background == 'truth' else np.zeros_like(u_dag)
        training.append(TrainingPair(u_dag=u_dag, y_dag=y_dag, z_o=z_o, u_b=u_b, forcing=f))

    logger.info('built %i training pairs (preset %s, noise sd %g)', len(training), preset, sd)
    return training
