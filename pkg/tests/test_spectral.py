import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sampcap import (Channel, FrequencyGrid, SpectralSet, Spectrum, integrate,
                     landau_rate, noise_psd, snr)
from sampcap.errors import DomainError, GridMismatchError, OutOfRangeError
from sampcap.spectral import (flat_channel, gaussian_channel, piecewise_channel,
                              triangle_channel, two_band_channel)


def test_grid_edges_and_centers_symmetric():
    g = FrequencyGrid(1.0, 10)
    assert g.df == pytest.approx(0.2)
    np.testing.assert_array_equal(g.edges, -g.edges[::-1])
    np.testing.assert_array_equal(g.centers, -g.centers[::-1])
    assert g.edges[0] == -1.0 and g.edges[-1] == 1.0


@pytest.mark.parametrize("n", [0, 3, -2, 2.5])
def test_grid_rejects_bad_bin_counts(n):
    with pytest.raises(DomainError):
        FrequencyGrid(1.0, n)


def test_grid_rejects_bad_f_max():
    with pytest.raises(DomainError):
        FrequencyGrid(0.0, 4)


def test_spectrum_is_read_only_and_validated(grid64):
    s = grid64.constant(2.0)
    with pytest.raises(ValueError):
        s.values[0] = 1.0
    with pytest.raises(DomainError):
        Spectrum(grid64, -np.ones(64))
    with pytest.raises(DomainError):
        Spectrum(grid64, np.ones(63))
    with pytest.raises(DomainError):
        Spectrum(grid64, np.full(64, np.nan))
    c = Spectrum(grid64, np.ones(64) * 1j)
    assert c.complex_valued
    np.testing.assert_allclose(c.magnitude_squared().values, 1.0)


def test_snr_identity_case(grid64):
    ch = Channel(grid64.constant(1.0), noise_psd(grid64, 1.0))
    np.testing.assert_array_equal(snr(ch).values, 1.0)


def test_snr_pointwise_division(grid64):
    ch = Channel(grid64.constant(4.0), noise_psd(grid64, 2.0))
    np.testing.assert_array_equal(snr(ch).values, 2.0)


def test_zero_noise_bin_rejected_at_construction(grid64):
    values = np.ones(64)
    values[5] = 0.0
    with pytest.raises(DomainError):
        noise_psd(grid64, values)


def test_channel_grid_mismatch(grid64):
    with pytest.raises(GridMismatchError):
        Channel(grid64.constant(1.0), noise_psd(FrequencyGrid(1.0, 32), 1.0))


def test_channel_rejects_complex_gain(grid64):
    with pytest.raises(DomainError):
        Channel(Spectrum(grid64, np.ones(64) + 0j), noise_psd(grid64, 1.0))


def test_integrate_unit_rectangle(grid64):
    assert integrate(grid64.constant(1.0), SpectralSet.interval(0, 1)) == 1.0


def test_integrate_constant_two(grid64):
    assert integrate(grid64.constant(2.0), SpectralSet.interval(-0.5, 0.5)) == 2.0


@pytest.mark.parametrize("n", [16, 64, 256])
def test_integrate_triangle_midpoint_error(n):
    g = FrequencyGrid(1.0, n)
    tri = g.evaluate(lambda f: 1 - np.abs(f))
    # The midpoint rule is exact on each linear piece; only the kink bin at
    # zero (absent for even n) could contribute, so the error is O(df^2).
    assert abs(integrate(tri, SpectralSet.interval(-1, 1)) - 1.0) <= g.df ** 2


def test_integrate_partial_bin_weighting():
    g = FrequencyGrid(1.0, 4)
    s = Spectrum(g, [1.0, 2.0, 3.0, 4.0])
    # [-0.75, 0.25) covers half of bin 0, all of bin 1, half of bin 2.
    assert integrate(s, SpectralSet.interval(-0.75, 0.25)) == pytest.approx(
        0.25 * 1 + 0.5 * 2 + 0.25 * 3, rel=1e-15)


def test_integrate_out_of_range(grid64):
    with pytest.raises(OutOfRangeError):
        integrate(grid64.constant(1.0), SpectralSet.interval(0.5, 1.5))


def test_landau_rate_examples():
    assert landau_rate(SpectralSet.interval(-0.35, 0.35)) == pytest.approx(0.7)
    assert landau_rate(SpectralSet()) == 0
    assert landau_rate(SpectralSet(((0, 0.3), (0.7, 1.0)))) == pytest.approx(0.6)


def test_spectral_set_normalization():
    s = SpectralSet(((0.5, 0.7), (0.0, 0.2), (0.1, 0.3), (0.3, 0.4), (0.9, 0.9)))
    assert s.intervals == ((0.0, 0.4), (0.5, 0.7))
    assert SpectralSet(s.intervals) == s
    assert s.intersection(SpectralSet.interval(0.35, 0.6)).intervals == \
        ((0.35, 0.4), (0.5, 0.6))
    assert s.shifted(1.0).intervals == ((1.0, 1.4), (1.5, 1.7))
    assert SpectralSet().is_empty


def test_from_bins_and_indicator(grid64):
    s = SpectralSet.from_bins(grid64, [3, 4, 10])
    assert s.measure == pytest.approx(3 * grid64.df)
    ind = s.indicator(grid64).values
    assert set(np.flatnonzero(ind)) == {3, 4, 10}


def test_flat_channel_uses_bin_averages():
    g = FrequencyGrid(1.0, 8)
    ch = flat_channel(g, 3.0, 0.6)
    gamma = snr(ch).values
    # Band [-0.3, 0.3) covers a fifth of each edge bin.
    np.testing.assert_allclose(gamma, [0, 0, 0.6, 3, 3, 0.6, 0, 0], rtol=1e-14, atol=1e-15)
    assert integrate(snr(ch), SpectralSet.interval(-1, 1)) == pytest.approx(3.0 * 0.6)


def test_family_shapes(grid64):
    tri = snr(triangle_channel(grid64, 2.0)).values
    assert tri.max() == pytest.approx(2.0 * (1 - grid64.df / 2))
    gauss = snr(gaussian_channel(grid64, 1.0, 0.2, center=0.5)).values
    assert grid64.centers[np.argmax(gauss)] == pytest.approx(0.5, abs=grid64.df)
    two = snr(two_band_channel(grid64, 1.0, 10.0, 0.5)).values
    assert set(np.unique(two)) == {1.0, 10.0}
    pw = piecewise_channel(grid64, [((-0.5, 0.0), 2.0, 1.0), ((0.0, 0.5), 1.0, 2.0)])
    np.testing.assert_allclose(integrate(snr(pw), SpectralSet.interval(-1, 1)), 1.25)
    with pytest.raises(DomainError):
        piecewise_channel(grid64, [((-0.5, 0.1), 1.0, 1.0), ((0.0, 0.5), 1.0, 1.0)])


intervals = st.lists(
    st.tuples(st.floats(-1, 1), st.floats(0, 0.5)).map(lambda t: (t[0], min(1.0, t[0] + t[1]))),
    max_size=6)


@settings(max_examples=60, deadline=None)
@given(intervals)
def test_normalization_idempotent(raw):
    s = SpectralSet(tuple(raw))
    assert SpectralSet(s.intervals) == s
    for (a, b), (c, d) in zip(s.intervals, s.intervals[1:]):
        assert a < b < c < d


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=16, max_size=16),
       st.floats(-1, 1), st.floats(0, 1), st.floats(0, 1))
def test_integrate_additive_over_disjoint_sets(values, a, l1, l2):
    g = FrequencyGrid(1.0, 16)
    s = Spectrum(g, values)
    b = min(1.0, a + l1)
    c = min(1.0, b + l2)
    left, right = SpectralSet.interval(a, b), SpectralSet.interval(b, c)
    whole = integrate(s, left.union(right))
    parts = integrate(s, left) + integrate(s, right)
    assert whole == pytest.approx(parts, rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=16, max_size=16),
       st.lists(st.floats(0, 10), min_size=16, max_size=16),
       st.floats(-1, 1), st.floats(0, 2))
def test_integrate_monotone_in_integrand(v1, v2, a, length):
    g = FrequencyGrid(1.0, 16)
    lo = np.minimum(v1, v2)
    hi = np.maximum(v1, v2)
    s = SpectralSet.interval(a, min(1.0, a + length))
    assert integrate(Spectrum(g, lo), s) <= integrate(Spectrum(g, hi), s)


def test_measure_uses_exact_sum():
    s = SpectralSet(tuple((i / 10, i / 10 + 0.05) for i in range(10)))
    assert s.measure == math.fsum(b - a for a, b in s.intervals)
    assert s.measure == pytest.approx(0.5, rel=1e-14)
