'''
Experiment configuration: a flat ``key = value`` text format, the validated ExperimentConfig it
parses into, and the preset settings of the placement studies.

Example file::

    # Experiment 1, first setting
    m = 20
    n = 12
    beta = 0.09
    sweep_key = beta_w
    sweep_values = 1e-5, 1e-4, 3e-4   # comma separated
    points = 0.2:0.2, 0.5:0.4         # x:y pairs, used with candidates = points
'''

import dataclasses
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from daplace.assimilation import LowerOptions
from daplace.constants import (EXPERIMENT2_POINTS, STALL_RTOL, STALL_WINDOW, __backgrounds__,
                               __candidate_modes__, __experiments__, __forcings__, __preconditioners__,
                               __presets__)
from daplace.exceptions import ConfigError
from daplace.grids import SpatialGrid, TimeGrid, build_spatial_grid, build_time_grid
from daplace.pde.nonlinearity import Nonlinearity
from daplace.pde.solvers import ParabolicModel
from daplace.placement.bilevel import UpperConfig

logger = logging.getLogger(__name__)

Point = Tuple[float, float]

# keys a sweep may vary
SWEEP_KEYS = ('beta_w', 'beta_sigma', 'beta', 'noise_sd', 'eps_penalty')


@dataclass(frozen=True)
class ExperimentConfig:
    '''
    Every parameter of one placement study. The defaults are the first setting of Experiment 1
    with a single sweep value.
    '''
    # discretization
    m: int = 20
    n: int = 12
    eps_reg: float = 0.1
    # diffusion coefficient, A = -kappa * Laplacian
    kappa: float = 0.03
    # lower level
    theta: float = 1e-3
    alpha: float = 0.1
    lower_tol: float = 1e-6
    lower_max_iter: int = 100
    lower_precondition: str = 'l2'
    # upper level
    beta: float = 0.09
    beta_w: float = 1e-3
    beta_sigma: float = 0.0
    eps_penalty: float = 0.5
    upper_tol: float = 1e-6
    upper_max_iter: int = 60
    stall_window: int = STALL_WINDOW
    stall_rtol: float = STALL_RTOL
    gamma_hat: float = 1e-4
    eps_active_max: float = 0.1
    adjoint_tol: float = 1e-8
    adjoint_max_apps: int = 200
    # training data
    preset: str = 'single'
    n_pairs: int = 1
    noise_sd: float = 0.0
    seed: int = 0
    jump: float = 0.0
    background: str = 'zero'
    forcing: str = 'default'
    # sensor candidates
    candidates: str = 'all'
    points: Tuple[Point, ...] = ()
    # sweep; sd_values adds a second sweep axis over the noise level
    sweep_key: str = 'beta_w'
    sweep_values: Tuple[float, ...] = (1e-3,)
    sd_values: Tuple[float, ...] = ()
    threshold_fallback: bool = False

    def __post_init__(self):
        _check(self.m >= 2, 'm', f'needs at least 2 nodes per dimension, got {self.m}')
        _check(self.n >= 1, 'n', f'needs at least one interior time step, got {self.n}')
        _check(self.eps_reg > 0, 'eps_reg', 'must be positive')
        _check(self.kappa > 0, 'kappa', 'must be positive')
        _check(self.theta > 0, 'theta', 'must be positive')
        _check(self.alpha > 0, 'alpha', 'must be positive')
        for key in ('beta', 'beta_w', 'beta_sigma', 'noise_sd'):
            _check(getattr(self, key) >= 0, key, f'must be nonnegative, got {getattr(self, key)}')
        _check(0 < self.eps_penalty <= 0.5, 'eps_penalty', f'must lie in (0, 1/2], got {self.eps_penalty}')
        _check(0 < self.gamma_hat < 1, 'gamma_hat', 'must lie in (0, 1)')
        _check(0 < self.eps_active_max < 0.5, 'eps_active_max', 'must lie in (0, 1/2)')
        for key in ('lower_tol', 'upper_tol', 'adjoint_tol'):
            _check(getattr(self, key) > 0, key, 'must be positive')
        _check(self.stall_rtol >= 0, 'stall_rtol', 'must be nonnegative')
        for key in ('lower_max_iter', 'upper_max_iter', 'stall_window', 'adjoint_max_apps'):
            _check(getattr(self, key) >= 1, key, 'must be at least 1')

        _choice(self.preset, __presets__, 'preset')
        _choice(self.candidates, __candidate_modes__, 'candidates')
        _choice(self.background, __backgrounds__, 'background')
        _choice(self.forcing, __forcings__, 'forcing')
        _choice(self.lower_precondition, __preconditioners__, 'lower_precondition')
        _choice(self.sweep_key, SWEEP_KEYS, 'sweep_key')

        if self.preset == 'single':
            _check(self.n_pairs == 1, 'n_pairs', 'the single preset has exactly one training pair')
        elif self.preset == 'nine-variant':
            _check(self.n_pairs == 9, 'n_pairs', 'the nine-variant preset has exactly nine training pairs')
        else:
            _check(self.n_pairs >= 1, 'n_pairs', 'needs at least one training pair')

        if self.candidates == 'points':
            _check(len(self.points) > 0, 'points', 'candidates = points needs at least one point')
        _check(len(self.sweep_values) > 0, 'sweep_values', 'sweep list is empty')
        for v in self.sweep_values + self.sd_values:
            _check(v >= 0, 'sweep_values', f'sweep values must be nonnegative, got {v}')

    # ------------------------------------------------------------------ builders

    def spatial_grid(self) -> SpatialGrid:
        return build_spatial_grid(self.m, self.points if self.candidates == 'points' else None)

    def time_grid(self) -> TimeGrid:
        return build_time_grid(self.n)

    def model(self) -> ParabolicModel:
        return ParabolicModel(self.spatial_grid(), self.time_grid(), nl=Nonlinearity(self.eps_reg),
                              kappa=self.kappa)

    def upper_config(self) -> UpperConfig:
        lower = LowerOptions(tol=self.lower_tol, max_iter=self.lower_max_iter,
                             precondition=self.lower_precondition)
        return UpperConfig(beta=self.beta, beta_w=self.beta_w, beta_sigma=self.beta_sigma,
                           eps_penalty=self.eps_penalty, eps_active_max=self.eps_active_max,
                           tol=self.upper_tol, max_iter=self.upper_max_iter, gamma_hat=self.gamma_hat,
                           stall_window=self.stall_window, stall_rtol=self.stall_rtol,
                           adjoint_tol=self.adjoint_tol, adjoint_max_apps=self.adjoint_max_apps,
                           theta=self.theta, alpha=self.alpha, lower=lower)

    # ------------------------------------------------------------------ updates

    def override(self, **pairs: str) -> 'ExperimentConfig':
        '''string valued key=value overrides, parsed as in a config file'''
        return replace(self, **{key: _parse_value(key, value) for key, value in pairs.items()})

    def with_value(self, key: str, value: float) -> 'ExperimentConfig':
        return replace(self, **{key: value})

    def to_text(self) -> str:
        '''serializes every key; load_config(to_text()) gives back an equal config'''
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f'{f.name} = {_format_value(getattr(self, f.name))}')
        return '\n'.join(lines) + '\n'


def _check(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ConfigError(message, field=key)


def _choice(value: str, options, key: str) -> None:
    if value not in options:
        raise ConfigError(f'{value} not supported.', field=key)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    if key not in _FIELDS:
        raise ConfigError('unknown key', field=key)

    default = _FIELDS[key].default
    raw = raw.strip()
    try:
        if key == 'points':
            if not raw:
                return ()
            return tuple(_parse_point(item) for item in raw.split(','))
        if isinstance(default, tuple):
            return tuple(float(item) for item in raw.split(',') if item.strip())
        if isinstance(default, bool):
            if raw.lower() not in ('true', 'false', '1', '0', 'yes', 'no'):
                raise ValueError(f'{raw} is not a boolean')
            return raw.lower() in ('true', '1', 'yes')
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as err:
        raise ConfigError(f'cannot parse {raw!r}: {err}', field=key) from err


def _parse_point(item: str) -> Point:
    x, y = item.strip().split(':')
    return (float(x), float(y))


def _format_value(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, tuple):
        return ', '.join(f'{p[0]!r}:{p[1]!r}' if isinstance(p, tuple) else repr(p) for p in value)
    return repr(value) if isinstance(value, float) else str(value)


def parse_config(text: str, base: Optional[ExperimentConfig]=None) -> ExperimentConfig:
    '''
    Parses config text on top of base (default: ExperimentConfig()).

    Raises
    ------
    ConfigError
        with ``line`` set for malformed lines, with ``field`` set for unknown keys and invalid
        values.
    '''
    values: Dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        # remove comments
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f'expected "key = value", got {line!r}', line=lineno)
        key, raw = (part.strip() for part in line.split('=', 1))
        if not key:
            raise ConfigError('missing key', line=lineno)
        values[key] = _parse_value(key, raw)

    return replace(base if base is not None else ExperimentConfig(), **values)


def load_config(path: Union[str, Path], base: Optional[ExperimentConfig]=None) -> ExperimentConfig:
    '''
    Reads and validates a configuration file.

    Raises
    ------
    FileNotFoundError
        if path does not exist.
    ConfigError
        on parse or validation errors.
    '''
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f'config file {path} not found')
    cfg = parse_config(path.read_text(), base=base)
    logger.info('loaded configuration from %s', path)
    return cfg


SWEEP_1A_BETA_W = (1e-5, 1e-4, 3e-4, 5e-4, 1e-3, 2e-3, 3e-3, 5e-3, 6e-3, 7e-3,
                 7.2e-3, 7.3e-3, 7.4e-3, 7.8e-3, 7.9e-3, 8e-3)
SWEEP_1B_BETA_SIGMA = (0.001, 0.002, 0.003, 0.005, 0.006, 0.007, 0.008, 0.009, 0.01, 0.02, 0.05)
SWEEP_2_BETA_W = (1e-5, 3e-5, 4e-5, 5e-5, 6e-5, 8e-5, 9.2e-5, 1.2e-4, 2e-4)
SWEEP_3_BETA_W = (1e-4, 1e-3, 2e-3, 4e-3, 6e-3, 8e-3, 9e-3, 0.010, 0.012, 0.014,
                 0.015, 0.016, 0.017, 0.018, 0.02)
SWEEP_4_BETA_W = (0.01, 0.05, 0.1)
SWEEP_4_SD = (0.001, 0.01)


def experiment_config(experiment: str) -> ExperimentConfig:
    '''
    Settings of the placement studies:

        1a  beta_w sweep, every node a candidate, m = 20
        1b  beta_sigma sweep on the 10 x 10 grid
        2   beta_w sweep over 8 prescribed locations
        3   beta_w sweep with nine training initial conditions carrying a jump
        4   beta_w x noise level grid, four pairs sharing one initial condition
    '''
    if experiment not in __experiments__:
        raise ValueError(f'experiment {experiment} not supported.')

    if experiment == '1a':
        return ExperimentConfig(sweep_key='beta_w', sweep_values=SWEEP_1A_BETA_W)
    if experiment == '1b':
        return ExperimentConfig(m=10, beta_w=1e-4, beta=0.1, eps_penalty=1 / 8,
                                sweep_key='beta_sigma', sweep_values=SWEEP_1B_BETA_SIGMA)
    if experiment == '2':
        return ExperimentConfig(m=10, candidates='points', points=EXPERIMENT2_POINTS,
                                beta=0.0, beta_sigma=0.0, eps_penalty=1 / 8,
                                sweep_key='beta_w', sweep_values=SWEEP_2_BETA_W)
    if experiment == '3':
        return ExperimentConfig(preset='nine-variant', n_pairs=9, jump=0.1,
                                beta=0.001, beta_sigma=0.001, eps_penalty=1 / 8,
                                sweep_key='beta_w', sweep_values=SWEEP_3_BETA_W)
    return ExperimentConfig(preset='common-u', n_pairs=4, beta=0.0, beta_sigma=1e-6,
                            sweep_key='beta_w', sweep_values=SWEEP_4_BETA_W, sd_values=SWEEP_4_SD)
