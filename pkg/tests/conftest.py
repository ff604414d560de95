import numpy as np
import pytest

from photonlab.core import RngSeed


@pytest.fixture
def seed():
    return RngSeed(123456789)


def brute_force_pairs(events, tau_min, tau_max, bin_width):
    """O(N^2) reference for the forward all-pairs histogram."""
    events = np.asarray(events, dtype=np.int64)
    n_bins = (tau_max - tau_min) // bin_width
    counts = np.zeros(n_bins, dtype=np.int64)
    for i in range(len(events)):
        for j in range(i + 1, len(events)):
            d = events[j] - events[i]
            if tau_min <= d < tau_max:
                counts[(d - tau_min) // bin_width] += 1
    return counts


def brute_force_cross(a, b, tau_max, bin_width):
    """O(N*M) reference for the two-sided cross histogram."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n_bins = (2 * tau_max) // bin_width
    counts = np.zeros(n_bins, dtype=np.int64)
    for ta in a:
        for tb in b:
            d = tb - ta
            if -tau_max <= d < tau_max:
                counts[(d + tau_max) // bin_width] += 1
    return counts
