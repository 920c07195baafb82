'''
Main class for running a placement study: a sweep of one penalty weight (optionally crossed with
noise levels), one two-stage placement optimization per sweep value, binarization of the result
and the statistics the report tables are built from.
'''

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from daplace.constants import __experiments__
from daplace.exceptions import DaplaceError, TooAmbiguousError
from daplace.experiments.config import ExperimentConfig, experiment_config
from daplace.experiments.export import export_report
from daplace.experiments.metrics import error_metrics
from daplace.experiments.training import TrainingPair, build_training_set
from daplace.placement.bilevel import BilevelProblem, PlacementVector
from daplace.placement.classify import band_counts_sigma, band_counts_w, classify_and_binarize
from daplace.placement.optimizer import optimize_placement

logger = logging.getLogger(__name__)


@dataclass
class SweepRow:
    '''
    Outcome of one sweep value. Failed rows keep status and message, their numbers are NaN.
    '''
    index: int
    value: float
    sd: float
    status: str = 'ok'
    message: str = ''
    W: Optional[PlacementVector] = None
    W_binary: Optional[PlacementVector] = None
    J0: float = math.nan
    J_end: float = math.nan
    iterations: int = 0
    da_iterations: int = 0
    pde_solves: int = 0
    elliptic_solves: int = 0
    kkt_residual: float = math.nan
    error_abs: float = math.nan
    error_rel: float = math.nan

    @property
    def ok(self) -> bool:
        return self.W is not None

    @property
    def norm_w(self) -> float:
        return float(np.sum(self.W.w)) if self.ok else math.nan

    @property
    def norm_sigma(self) -> float:
        return float(np.sum(self.W.sigma)) if self.ok else math.nan

    def counts_w(self, binary: bool=False) -> Optional[Dict[str, int]]:
        W = self.W_binary if binary else self.W
        return band_counts_w(W.w) if W is not None else None

    def counts_sigma(self, binary: bool=False) -> Optional[Dict[str, int]]:
        W = self.W_binary if binary else self.W
        return band_counts_sigma(W.sigma) if W is not None else None


@dataclass
class RunReport:
    experiment: Optional[str]
    config: ExperimentConfig
    rows: List[SweepRow]
    candidate_coords: np.ndarray = field(repr=False)
    subintervals: np.ndarray = field(repr=False)


class PlacementStudy():

    def __init__(self, cfg: ExperimentConfig, experiment: Optional[str]=None):
        '''
        Initialize a PlacementStudy. The model is shared by every sweep row; training sets are
        built lazily, one per noise level.

        Parameters
        ----------
        cfg: ExperimentConfig
        experiment: str
            experiment id selecting the report tables, None for a plain placement run.

        Raises
        ------
        ValueError
            if the experiment id is not supported.
        '''
        if experiment is not None and experiment not in __experiments__:
            raise ValueError(f'experiment {experiment} not supported.')

        self.cfg = cfg
        self.experiment = experiment
        self.model = cfg.model()
        self.rows: List[SweepRow] = []
        self._training: Dict[float, List[TrainingPair]] = {}

    def sweep_points(self) -> List[Tuple[float, float]]:
        '''(sweep value, noise sd) per row; noise levels vary fastest'''
        if self.cfg.sweep_key == 'noise_sd':
            return [(value, value) for value in self.cfg.sweep_values]
        sds = self.cfg.sd_values if self.cfg.sd_values else (self.cfg.noise_sd,)
        return [(value, sd) for value in self.cfg.sweep_values for sd in sds]

    def training_set(self, sd: float) -> List[TrainingPair]:
        if sd not in self._training:
            cfg = self.cfg
            self._training[sd] = build_training_set(cfg.preset, cfg.n_pairs, cfg.seed, self.model,
                                                    sd=sd, jump=cfg.jump, background=cfg.background,
                                                    forcing=cfg.forcing)
        return self._training[sd]

    def row_config(self, value: float, sd: float) -> ExperimentConfig:
        return self.cfg.with_value(self.cfg.sweep_key, value).with_value('noise_sd', sd)

    def run_row(self, index: int, value: float, sd: float) -> SweepRow:
        '''
        Optimizes and binarizes the placement for one sweep value. Numerical and validation
        failures are recorded in the row instead of raised.
        '''
        row = SweepRow(index=index, value=value, sd=sd)
        try:
            cfg = self.row_config(value, sd)
            training = self.training_set(sd)
            upper = cfg.upper_config()
            result = optimize_placement(training, self.model, upper)
        except DaplaceError as err:
            logger.warning('sweep row %i (%s = %g) failed: %s', index, self.cfg.sweep_key, value, err)
            row.status, row.message = 'failed', str(err)
            return row

        row.W = result.W
        row.J0, row.J_end = result.J0, result.J_end
        row.iterations = result.iterations
        row.da_iterations = result.da_iterations
        row.pde_solves = result.pde_solves
        row.elliptic_solves = result.elliptic_solves
        row.kkt_residual = result.kkt.residual
        row.error_abs, row.error_rel = error_metrics(result.sols, training, self.model)
        if any(stage.status == 'line_search_failed' for stage in result.stages):
            row.status = 'stage2_line_search'
        elif not result.converged:
            # stalled or out of iterations
            row.status = 'not_converged'

        problem = BilevelProblem(self.model, training, upper)
        warm = [sol.u for sol in result.sols]
        try:
            row.W_binary = classify_and_binarize(result.W,
                                                 lambda Wb: problem.evaluate(Wb, 'sparsity', warm=warm).cost,
                                                 threshold=cfg.threshold_fallback)
        except TooAmbiguousError as err:
            logger.warning('sweep row %i not binarized: %s', index, err)
            row.status, row.message = 'too_ambiguous', str(err)
        except DaplaceError as err:
            logger.warning('sweep row %i binarization failed: %s', index, err)
            row.status, row.message = 'binarization_failed', str(err)

        logger.info('row %i: %s = %g, sd = %g, |w| = %.4g, |sigma| = %.4g, iterations %i',
                    index, self.cfg.sweep_key, value, sd, row.norm_w, row.norm_sigma, row.iterations)
        return row

    def run(self) -> RunReport:
        points = self.sweep_points()
        for index, (value, sd) in enumerate(points):
            logger.info('Progress: row %i of %i', index + 1, len(points))
            self.rows.append(self.run_row(index, value, sd))

        grid = self.model.grid
        return RunReport(experiment=self.experiment, config=self.cfg, rows=list(self.rows),
                         candidate_coords=grid.nodes[grid.candidate_ids],
                         subintervals=self.model.tg.subintervals)


def run_experiment(experiment: str, cfg: Optional[ExperimentConfig]=None,
                   out_dir: Optional[Union[str, Path]]=None) -> RunReport:
    '''
    Runs one of the placement studies.

    Parameters
    ----------
    experiment: str
        one of '1a', '1b', '2', '3', '4'.
    cfg: ExperimentConfig
        settings to run with. Default is experiment_config(experiment).
    out_dir: str
        if given, the report tables and data files are written there.

    Returns
    -------
    report: RunReport

    Raises
    ------
    ValueError
        if the experiment id is not supported.
    '''
    if experiment not in __experiments__:
        raise ValueError(f'experiment {experiment} not supported.')

    cfg = cfg if cfg is not None else experiment_config(experiment)
    report = PlacementStudy(cfg, experiment).run()

    if out_dir is not None:
        export_report(report, out_dir)

    return report
