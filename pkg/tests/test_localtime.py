from __future__ import annotations

import math

import numpy as np
import pytest

from ibmpower.gaussian_paths import Streams, sample_fine_path
from ibmpower.localtime import (MEAN_L10, LocalTimeProfile, occupation_profile, occupation_profiles,
                                skeletal_vs_true, tail_envelope)
from ibmpower.skeleton import DyadicLevel, EmbeddedWalk, tally_crossings
from ibmpower.stats import mean_se

LEVELS = (8, 12, 16)


def test_zero_time(streams):
    path = sample_fine_path(streams.Y, 1.0, 2 ** -12)
    prof = occupation_profile(path, 12, 0.0)
    assert not np.any(prof.values)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
def test_normalization(streams, t):
    n = 10
    path = sample_fine_path(streams.Y, 1.0, 2 ** -14)
    prof = occupation_profile(path, n, t)
    assert math.fsum(prof.values) * 2 ** (-n / 2) == pytest.approx(t, rel=1e-12)
    assert np.all(prof.values >= 0)


def test_profiles_monotone_in_time(streams):
    path = sample_fine_path(streams.Y, 1.0, 2 ** -12)
    _, dens = occupation_profiles(path, 8, [0.25, 0.5, 1.0])
    assert np.all(np.diff(dens, axis=0) >= -1e-12)


def test_profile_rejects_short_path(streams):
    path = sample_fine_path(streams.Y, 0.5, 2 ** -10)
    with pytest.raises(ValueError):
        occupation_profile(path, 8, 1.0)


def test_mean_local_time_at_zero():
    # path mesh 2^-n/16 as in coupled mode; a mesh of 2^-n biases the estimate up by O(2^-n/2)
    n = 12
    vals = []
    for r in range(10_000):
        path = sample_fine_path(Streams.for_replicate(21, r).Y, 1.0, 2 ** -(n + 4))
        vals.append(occupation_profile(path, n, 1.0).at(0))
    m, se = mean_se(vals)
    assert abs(m - MEAN_L10) <= 3 * se


def test_tail_envelope():
    n = 10
    xs = np.array([0.0, 0.5, 1.0, 2.0])
    idx = np.rint(xs * 2 ** (n / 2)).astype(int)
    samples = []
    for r in range(2000):
        path = sample_fine_path(Streams.for_replicate(22, r).Y, 1.0, 2 ** -n)
        prof = occupation_profile(path, n, 1.0)
        samples.append([prof.at(j) for j in idx])
    samples = np.array(samples)
    means = samples.mean(axis=0)
    ses = samples.std(axis=0, ddof=1) / math.sqrt(len(samples))
    assert np.all(means <= tail_envelope(xs, 1.0) + 3 * ses)


def test_skeletal_vs_true_degenerate():
    lv = DyadicLevel(4)
    tally = tally_crossings(EmbeddedWalk(lv, np.array([0])), 0.0)
    prof = LocalTimeProfile(lv, 0, np.zeros(0), 0.0, lv.spatial_mesh)
    assert skeletal_vs_true(prof, tally) == (0.0, 0.0)
    other = LocalTimeProfile(DyadicLevel(6), 0, np.zeros(0), 0.0, 0.125)
    with pytest.raises(ValueError):
        skeletal_vs_true(other, tally)


def test_coupled_normalization_exact(coupled_ensemble):
    for n in LEVELS:
        assert np.max(coupled_ensemble[n]["norm_err"]) < 1e-12


def test_skeletal_gap_rate(coupled_ensemble):
    med = [np.median(coupled_ensemble[n]["weighted_gap"]) for n in LEVELS]
    assert med[0] > med[1] > med[2]
    ratios = [m / (n * 2 ** (-n / 4)) for m, n in zip(med, LEVELS)]
    assert max(ratios) / min(ratios) <= 3
