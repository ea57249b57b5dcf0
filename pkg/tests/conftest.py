import numpy as np
import pytest

from sampcap import Channel, FrequencyGrid, Spectrum, noise_psd
from sampcap.periodic import PeriodicSampler


def random_channel(rng, grid, zero_fraction=0.25):
    """Channel with random gain (some bins switched off) and random noise."""
    h = rng.uniform(0.0, 4.0, grid.n_bins)
    h[rng.random(grid.n_bins) < zero_fraction] = 0.0
    return Channel(Spectrum(grid, h), noise_psd(grid, rng.uniform(0.5, 2.0, grid.n_bins)))


def random_piecewise_channel(rng, grid, pieces=4):
    """Channel whose SNR is constant on a few random runs of bins."""
    cuts = np.sort(rng.choice(np.arange(1, grid.n_bins), pieces - 1, replace=False))
    levels = rng.uniform(0.0, 5.0, pieces)
    levels[rng.random(pieces) < 0.2] = 0.0
    if not levels.any():
        levels[rng.integers(pieces)] = rng.uniform(0.5, 5.0)
    h = np.repeat(levels, np.diff(np.concatenate([[0], cuts, [grid.n_bins]])))
    return Channel(Spectrum(grid, h), noise_psd(grid, np.ones(grid.n_bins)))


def random_sampler(rng, grid, m, M):
    """Periodic sampler with random complex responses and offsets."""
    period = 1.0 / (m * grid.df)
    offsets = np.sort(rng.uniform(0.0, period, M))
    responses = rng.normal(size=(M, grid.n_bins)) + 1j * rng.normal(size=(M, grid.n_bins))
    return PeriodicSampler(period, offsets, responses, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def grid64():
    return FrequencyGrid(1.0, 64)
