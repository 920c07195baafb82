import numpy as np
import pytest
from numpy.testing import assert_array_equal

from daplace.exceptions import TooAmbiguousError
from daplace.placement import (PlacementVector, band_counts_sigma, band_counts_w, classify_and_binarize,
                               placement_labels)


def test_sensor_bands():
    w = np.array([0.0, 0.1, 0.2, 0.5, 0.8, 0.9, 1.0])
    assert band_counts_w(w) == {'zeros': 1, 'band1': 2, 'band2': 2, 'band3': 1, 'ones': 1}
    assert_array_equal(placement_labels(w), [0, 0, 0, 2, 2, 3, 1])


def test_window_bands():
    sigma = np.array([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0])
    assert band_counts_sigma(sigma) == {'zeros': 1, 'band1': 1, 'band2': 1, 'band3': 1, 'band4': 2, 'ones': 1}


def never_called(W):
    raise AssertionError('no search expected')


def test_outer_bands_round_directly():
    W = PlacementVector(w=np.array([0.1, 0.9, 1.0]), sigma=np.array([0.1, 0.8]))
    binary = classify_and_binarize(W, never_called)
    assert_array_equal(binary.w, [0.0, 1.0, 1.0])
    assert_array_equal(binary.sigma, [0.0, 1.0])
    assert binary.is_binary()


def test_exhaustive_search_picks_cheapest():
    W = PlacementVector(w=np.array([0.5, 0.5, 0.95]), sigma=np.array([0.3, 1.0]))
    target = np.array([1.0, 0.0, 1.0, 0.0, 1.0])
    calls = []

    def cost(candidate):
        calls.append(candidate.flat)
        return float(np.sum((candidate.flat - target)**2))

    binary = classify_and_binarize(W, cost)
    assert_array_equal(binary.flat, target)
    assert len(calls) == 8
    # outer entries are never searched
    assert all(c[2] == 1.0 and c[4] == 1.0 for c in calls)


def test_ties_keep_first_candidate():
    W = PlacementVector(w=np.array([0.5, 0.5, 0.95]), sigma=np.array([0.3, 1.0]))
    binary = classify_and_binarize(W, lambda candidate: 1.0)
    assert_array_equal(binary.flat, [0.0, 0.0, 1.0, 0.0, 1.0])


def test_threshold_rounding():
    W = PlacementVector(w=np.array([0.6, 0.3]), sigma=np.array([0.4, 0.6]))
    binary = classify_and_binarize(W, never_called, threshold=True)
    assert_array_equal(binary.w, [1.0, 0.0])
    assert_array_equal(binary.sigma, [0.0, 1.0])


def test_too_many_undecided_entries():
    W = PlacementVector(w=np.full(13, 0.5), sigma=np.ones(3))
    with pytest.raises(TooAmbiguousError):
        classify_and_binarize(W, never_called)
    with pytest.raises(TooAmbiguousError):
        classify_and_binarize(PlacementVector(w=np.full(2, 0.5), sigma=np.ones(1)), never_called, max_exhaustive=1)
