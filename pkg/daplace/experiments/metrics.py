'''
State reconstruction errors over a training set.
'''

from typing import Sequence, Tuple

import numpy as np

from daplace.assimilation import LowerSolution
from daplace.exceptions import ShapeError
from daplace.pde.solvers import ParabolicModel


def error_metrics(sols: Sequence[LowerSolution], training: Sequence, model: ParabolicModel) -> Tuple[float, float]:
    '''
    error_abs = (1/N) sum_j ||y_dag_j - y_j||,  error_rel = sum_j ||y_dag_j - y_j|| / sum_j ||y_dag_j||,
    with the discrete L2(Q) norm. error_rel is 0 when every y_dag_j vanishes.

    Raises
    ------
    ShapeError
        if the number of solutions and training pairs differ.
    '''
    if len(sols) != len(training) or not sols:
        raise ShapeError(f'{len(sols)} lower solutions for {len(training)} training pairs')

    errors = np.array([model.norm_ht(pair.y_dag - sol.y) for sol, pair in zip(sols, training)])
    sizes = np.array([model.norm_ht(pair.y_dag) for pair in training])
    N = len(sols)

    error_abs = float(np.sum(errors) / N)
    total = float(np.sum(sizes))
    error_rel = float(np.sum(errors) / total) if total > 0 else 0.0
    if total > 0:
        assert np.isclose(error_rel, error_abs * N / total, rtol=1e-12, atol=0.0)
    return error_abs, error_rel
