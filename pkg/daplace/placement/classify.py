'''
Interval-band classification of relaxed placements and their conversion to binary ones.

w is split into I1 = (0, 0.2], I2 = (0.2, 0.8], I3 = (0.8, 1) and sigma into the quartile bands
(0, 0.25), [0.25, 0.5), [0.5, 0.75), [0.75, 1); exact zeros and ones are counted separately.
'''

import itertools
import logging
from typing import Callable, Dict

import numpy as np

from daplace.constants import MAX_EXHAUSTIVE, SIGMA_BANDS, W_BANDS
from daplace.exceptions import TooAmbiguousError
from daplace.placement.bilevel import PlacementVector

logger = logging.getLogger(__name__)


def band_counts_w(w: np.ndarray) -> Dict[str, int]:
    lo, hi = W_BANDS
    return {'zeros': int(np.sum(w == 0.0)),
            'band1': int(np.sum((w > 0.0) & (w <= lo))),
            'band2': int(np.sum((w > lo) & (w <= hi))),
            'band3': int(np.sum((w > hi) & (w < 1.0))),
            'ones': int(np.sum(w == 1.0))}


def band_counts_sigma(sigma: np.ndarray) -> Dict[str, int]:
    q1, q2, q3 = SIGMA_BANDS
    return {'zeros': int(np.sum(sigma == 0.0)),
            'band1': int(np.sum((sigma > 0.0) & (sigma < q1))),
            'band2': int(np.sum((sigma >= q1) & (sigma < q2))),
            'band3': int(np.sum((sigma >= q2) & (sigma < q3))),
            'band4': int(np.sum((sigma >= q3) & (sigma < 1.0))),
            'ones': int(np.sum(sigma == 1.0))}


def placement_labels(w: np.ndarray) -> np.ndarray:
    '''
    Scatter class per sensor: 0 for w <= 0.2, 2 for the middle band, 3 for (0.8, 1) and 1 for
    exactly one.
    '''
    lo, hi = W_BANDS
    labels = np.zeros(len(w), dtype=int)
    labels[(w > lo) & (w <= hi)] = 2
    labels[(w > hi) & (w < 1.0)] = 3
    labels[w == 1.0] = 1
    return labels


def _rounded(W: PlacementVector):
    '''fixed binary values plus the flat indices left undecided by the bands'''
    lo, hi = W_BANDS
    q1, _, q3 = SIGMA_BANDS
    w = np.where(W.w > hi, 1.0, 0.0)
    sigma = np.where(W.sigma >= q3, 1.0, 0.0)
    middle_w = np.flatnonzero((W.w > lo) & (W.w <= hi))
    middle_sigma = np.flatnonzero((W.sigma >= q1) & (W.sigma < q3))
    return np.concatenate([w, sigma]), np.concatenate([middle_w, W.n_s + middle_sigma])


def classify_and_binarize(W: PlacementVector, cost_fn: Callable[[PlacementVector], float],
                          threshold: bool=False,
                          max_exhaustive: int=MAX_EXHAUSTIVE) -> PlacementVector:
    '''
    Rounds a relaxed placement to {0, 1}.

    Entries in the outer bands are rounded directly. The remaining middle-band entries of w and
    sigma are resolved jointly by an exhaustive search over their binary completions, keeping the
    one with the lowest cost_fn (the first one found on ties).

    Parameters
    ----------
    W: PlacementVector
        relaxed placement, typically the result of the second optimization stage.
    cost_fn: Callable
        upper cost of a binary placement; re-assimilates the training set.
    threshold: bool
        round the middle band at 0.5 instead of searching.
    max_exhaustive: int
        largest number of middle-band entries searched exhaustively.

    Returns
    -------
    binary: PlacementVector

    Raises
    ------
    TooAmbiguousError
        if more than max_exhaustive entries sit in the middle bands and threshold is False.
    '''
    flat, middle = _rounded(W)
    n_s = W.n_s

    if len(middle) == 0:
        return PlacementVector.from_flat(flat, n_s)

    if threshold:
        flat[middle] = np.where(W.flat[middle] >= 0.5, 1.0, 0.0)
        return PlacementVector.from_flat(flat, n_s)

    if len(middle) > max_exhaustive:
        raise TooAmbiguousError(f'{len(middle)} middle-band entries exceed the exhaustive search '
                                f'limit of {max_exhaustive}')

    logger.info('exhaustive search over %i middle-band entries (%i candidates)', len(middle), 2**len(middle))
    best, best_cost = None, np.inf
    for bits in itertools.product([0.0, 1.0], repeat=len(middle)):
        trial = flat.copy()
        trial[middle] = bits
        candidate = PlacementVector.from_flat(trial, n_s)
        cost = cost_fn(candidate)
        if cost < best_cost:
            best, best_cost = candidate, cost

    return best
