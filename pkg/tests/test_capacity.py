import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sampcap import (Channel, FrequencyGrid, SpectralSet, capacity_sweep,
                     integrate, select_max_snr_set, snr, upper_bound)
from sampcap.errors import DomainError, RateExceedsGridError
from sampcap.spectral import flat_channel, triangle_channel

from conftest import random_channel
from oracles import exhaustive_optima, tie_break_choice


def test_tie_break_leftmost_first():
    g = FrequencyGrid(1.0, 64)
    b = select_max_snr_set(Channel.from_snr(g, np.ones(64)), 1.0)
    assert b.intervals == ((-1.0, 0.0),)


def test_unique_dominating_band():
    g = FrequencyGrid(1.0, 64)
    gamma = np.where(g.centers >= 0, 4.0, 1.0)
    b = select_max_snr_set(Channel.from_snr(g, gamma), 1.0)
    assert b.intervals == ((0.0, 1.0),)


def test_triangle_level_set_within_one_bin():
    g = FrequencyGrid(1.0, 64)
    b = select_max_snr_set(triangle_channel(g, 1.0), 1.0)
    assert len(b.intervals) == 1
    lo, hi = b.intervals[0]
    assert abs(lo + 0.5) <= g.df and abs(hi - 0.5) <= g.df
    assert b.measure == pytest.approx(1.0, rel=1e-12)


def test_fractional_bin_taken_from_left_edge():
    g = FrequencyGrid(2.0, 4)            # bins of width 1
    ch = Channel.from_snr(g, [1.0, 3.0, 2.0, 0.0])
    b = select_max_snr_set(ch, 1.5)
    assert b.intervals == ((-1.0, 0.5),)


def test_rate_validation():
    g = FrequencyGrid(1.0, 8)
    ch = Channel.from_snr(g, np.ones(8))
    with pytest.raises(DomainError):
        select_max_snr_set(ch, 0.0)
    with pytest.raises(RateExceedsGridError):
        select_max_snr_set(ch, 2.5)
    with pytest.raises(DomainError):
        upper_bound(ch, 1.0, -1.0)


@pytest.mark.parametrize("gain,W,f_s,P", [
    (3.0, 2.0, 0.5, 1.0), (3.0, 2.0, 1.0, 1.0), (3.0, 2.0, 2.0, 1.0),
    (0.5, 1.0, 1.5, 2.0), (10.0, 1.0, 0.25, 0.1)])
def test_flat_closed_form(gain, W, f_s, P):
    g = FrequencyGrid(1.0, 64)
    ch = flat_channel(g, gain, W)
    B = min(f_s, W)
    assert upper_bound(ch, f_s, P).capacity == pytest.approx(
        B / 2 * math.log1p(P * gain / B), rel=1e-12)


def test_two_band_example_matches_waterfill():
    g = FrequencyGrid(1.0, 64)
    gamma = np.where(g.centers >= 0, 4.0, 1.0)
    res = upper_bound(Channel.from_snr(g, gamma), 1.0, 0.5)
    assert res.capacity == pytest.approx(0.5 * math.log(3), abs=1e-12)
    assert res.nu == pytest.approx(0.75, abs=1e-12)


def test_sweep_examples():
    g = FrequencyGrid(1.0, 64)
    flat = flat_channel(g, 2.0, 2.0)
    rows = capacity_sweep(flat, [0.5, 1.0], 1.0)
    assert rows[0].capacity < rows[1].capacity
    dup = capacity_sweep(triangle_channel(g, 3.0), [0.7, 0.7], 1.0)
    assert dup[0].capacity == dup[1].capacity
    tri = capacity_sweep(triangle_channel(g, 3.0), np.linspace(0.125, 2.0, 16), 1.0)
    caps = [r.capacity for r in tri]
    assert all(b >= a for a, b in zip(caps, caps[1:]))
    desc = capacity_sweep(flat, [1.0, 0.5], 1.0)
    assert [r.f_s for r in desc] == [1.0, 0.5]


@pytest.mark.parametrize("seed", range(25))
def test_greedy_matches_exhaustive_search(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.choice([2, 4, 6, 8, 10, 12]))
    g = FrequencyGrid(n / 2, n)          # unit-width bins keep sums exact
    gamma = rng.integers(0, 4, n).astype(float)   # small range forces ties
    ch = Channel.from_snr(g, gamma)
    for half_bins in range(1, 2 * n + 1):
        f_s = half_bins / 2
        b = select_max_snr_set(ch, f_s)
        value, optima = exhaustive_optima(gamma, f_s, 1.0)
        assert integrate(snr(ch), b) == value
        whole, partial = tie_break_choice(optima, gamma)
        expected = SpectralSet.from_bins(g, whole)
        if partial is not None:
            e = g.edges[partial]
            expected = expected.union(SpectralSet.interval(e, e + f_s - len(whole)))
        assert b == expected


def test_greedy_tie_break_is_lexicographically_smallest():
    gamma = [2.0, 1.0, 2.0, 1.0, 2.0, 1.0]
    g = FrequencyGrid(3.0, 6)
    b = select_max_snr_set(Channel.from_snr(g, gamma), 2.0)
    assert b == SpectralSet.from_bins(g, [0, 2])
    b = select_max_snr_set(Channel.from_snr(g, gamma), 4.0)
    assert b == SpectralSet.from_bins(g, [0, 1, 2, 4])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.05, 2.0), st.floats(0.05, 2.0))
def test_nested_sets(seed, a, b):
    rng = np.random.default_rng(seed)
    g = FrequencyGrid(1.0, 32)
    ch = random_channel(rng, g)
    lo, hi = sorted((a, b))
    small = select_max_snr_set(ch, lo)
    big = select_max_snr_set(ch, hi)
    # Up to the fractional boundary bin, the smaller set is contained.
    missing = small.intersection(SpectralSet(((-1.0, 1.0),)))
    outside = missing.measure - small.intersection(big).measure
    assert outside <= g.df * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_upper_bound_nondecreasing_in_rate_and_power(seed):
    rng = np.random.default_rng(seed)
    g = FrequencyGrid(1.0, 32)
    ch = random_channel(rng, g)
    rates = np.linspace(0.1, 2.0, 12)
    powers = [0.0, 0.3, 1.0, 3.0]
    table = np.array([[upper_bound(ch, f, p).capacity for f in rates] for p in powers])
    assert np.all(np.diff(table, axis=1) >= 0)
    assert np.all(np.diff(table, axis=0) >= 0)
