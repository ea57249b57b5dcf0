"""Frequency grids, spectra, spectral sets and channel construction.

All spectra live on a uniform grid of ``n_bins`` bins covering
``[-f_max, f_max)``.  A spectrum is interpreted as piecewise constant on
its bins, so integrals over sets aligned with bin edges are exact and
partial bins are weighted by their overlap.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, GridMismatchError, OutOfRangeError

__all__ = [
    "FrequencyGrid",
    "Spectrum",
    "SpectralSet",
    "Channel",
    "noise_psd",
    "snr",
    "integrate",
    "landau_rate",
    "flat_channel",
    "triangle_channel",
    "two_band_channel",
    "gaussian_channel",
    "piecewise_channel",
]


def _frozen(array):
    array = np.array(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of ``n_bins`` bins covering ``[-f_max, f_max)``.

    Parameters
    ----------
    f_max : float
        Half-range of the frequency axis in Hz.
    n_bins : int
        Number of bins; must be even and at least 2.
    """

    f_max: float
    n_bins: int

    def __post_init__(self):
        f_max = float(self.f_max)
        if not (math.isfinite(f_max) and f_max > 0):
            raise DomainError(f"f_max must be positive and finite, got {self.f_max}")
        if int(self.n_bins) != self.n_bins or self.n_bins < 2 or self.n_bins % 2:
            raise DomainError(f"n_bins must be an even integer >= 2, got {self.n_bins}")
        object.__setattr__(self, "f_max", f_max)
        object.__setattr__(self, "n_bins", int(self.n_bins))

    @property
    def df(self):
        """Bin width in Hz."""
        return 2.0 * self.f_max / self.n_bins

    @property
    def edges(self):
        """The ``n_bins + 1`` bin edges, exactly symmetric about zero."""
        n = self.n_bins
        return self.f_max * (2.0 * np.arange(n + 1) - n) / n

    @property
    def centers(self):
        """Bin centers, exactly symmetric about zero."""
        n = self.n_bins
        return self.f_max * (2.0 * np.arange(n) + 1.0 - n) / n

    def zeros(self):
        return Spectrum(self, np.zeros(self.n_bins))

    def constant(self, value):
        return Spectrum(self, np.full(self.n_bins, float(value)))

    def evaluate(self, func):
        """Spectrum holding ``func`` sampled at the bin centers."""
        return Spectrum(self, np.asarray(func(self.centers), dtype=float))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Values on a frequency grid.

    A real spectrum (the default) must be nonnegative and is used for
    ``|H|^2``, noise PSDs and SNRs.  Passing complex values, or
    ``complex_valued=True``, produces the complex flavor used for sampler
    responses.
    """

    grid: FrequencyGrid
    values: np.ndarray
    complex_valued: bool = False

    def __post_init__(self):
        values = np.asarray(self.values)
        cplx = bool(self.complex_valued) or np.iscomplexobj(values)
        values = values.astype(complex if cplx else float)
        if values.shape != (self.grid.n_bins,):
            raise DomainError(
                f"spectrum has shape {values.shape}, grid needs ({self.grid.n_bins},)")
        if not np.all(np.isfinite(values)):
            raise DomainError("spectrum values must be finite")
        if not cplx and np.any(values < 0):
            raise DomainError("real spectrum values must be nonnegative")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "complex_valued", cplx)

    def __len__(self):
        return self.grid.n_bins

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def scaled(self, factor):
        return Spectrum(self.grid, self.values * factor, self.complex_valued)

    def magnitude_squared(self):
        return Spectrum(self.grid, np.abs(self.values) ** 2)


def noise_psd(grid, values):
    """Real spectrum that is additionally required to be strictly positive."""
    spectrum = Spectrum(grid, np.broadcast_to(np.asarray(values, dtype=float),
                                              (grid.n_bins,)))
    if np.any(spectrum.values <= 0):
        bad = int(np.argmin(spectrum.values))
        raise DomainError(
            f"noise PSD must be strictly positive; bin {bad} at "
            f"{grid.centers[bad]:.6g} Hz is {spectrum.values[bad]:.6g}")
    return spectrum


def _normalize_intervals(intervals):
    cleaned = []
    for pair in intervals:
        a, b = (float(x) for x in pair)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise DomainError(f"interval endpoints must be finite, got {pair}")
        if b > a:
            cleaned.append((a, b))
    cleaned.sort()
    merged = []
    for a, b in cleaned:
        if merged and a <= merged[-1][1]:
            if b > merged[-1][1]:
                merged[-1] = (merged[-1][0], b)
        else:
            merged.append((a, b))
    return tuple(merged)


@dataclass(frozen=True)
class SpectralSet:
    """Finite union of half-open frequency intervals ``[a, b)``.

    Intervals are sorted, empty ones dropped and touching or overlapping
    ones merged on construction, so two sets describing the same points
    compare equal.
    """

    intervals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", _normalize_intervals(self.intervals))

    @classmethod
    def interval(cls, a, b):
        return cls(((a, b),))

    @classmethod
    def from_bins(cls, grid, indices):
        """Union of whole grid bins."""
        edges = grid.edges
        return cls(tuple((edges[i], edges[i + 1]) for i in sorted(set(int(i) for i in indices))))

    @property
    def measure(self):
        return math.fsum(b - a for a, b in self.intervals)

    @property
    def is_empty(self):
        return not self.intervals

    def union(self, other):
        return SpectralSet(self.intervals + other.intervals)

    def intersection(self, other):
        out = []
        for a, b in self.intervals:
            for c, d in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if hi > lo:
                    out.append((lo, hi))
        return SpectralSet(tuple(out))

    def shifted(self, offset):
        return SpectralSet(tuple((a + offset, b + offset) for a, b in self.intervals))

    def check_within(self, grid):
        tol = 1e-12 * grid.f_max
        for a, b in self.intervals:
            if a < -grid.f_max - tol or b > grid.f_max + tol:
                raise OutOfRangeError(
                    f"interval [{a}, {b}) exceeds the grid range "
                    f"[{-grid.f_max}, {grid.f_max})")

    def overlap_weights(self, grid):
        """Per-bin overlap width (Hz) of the set with each grid bin.

        Bins fully covered by an interval get exactly ``edge[i+1] - edge[i]``
        regardless of the interval, which keeps results reproducible
        bit-for-bit when the set grows.
        """
        self.check_within(grid)
        edges = grid.edges
        df = grid.df
        n = grid.n_bins
        weights = np.zeros(n)
        for a, b in self.intervals:
            i0 = max(0, int(math.floor((a + grid.f_max) / df)) - 1)
            i1 = min(n, int(math.ceil((b + grid.f_max) / df)) + 1)
            lo = np.maximum(edges[i0:i1], a)
            hi = np.minimum(edges[i0 + 1:i1 + 1], b)
            weights[i0:i1] += np.clip(hi - lo, 0.0, None)
        return weights

    def indicator(self, grid):
        """Real spectrum equal to the covered fraction of each bin."""
        return Spectrum(grid, np.clip(self.overlap_weights(grid) / grid.df, 0.0, 1.0))


@dataclass(frozen=True)
class Channel:
    """Gaussian channel given by ``|H(f)|^2`` and a noise PSD on one grid."""

    h_sq: Spectrum
    noise: Spectrum

    def __post_init__(self):
        if self.h_sq.grid != self.noise.grid:
            raise GridMismatchError("channel gain and noise PSD use different grids")
        if self.h_sq.complex_valued or self.noise.complex_valued:
            raise DomainError("channel spectra must be real (store |H|^2, not H)")
        if np.any(self.noise.values <= 0):
            raise DomainError("noise PSD must be strictly positive")
        if not math.isfinite(float(np.sum(self.h_sq.values / self.noise.values))):
            raise DomainError("SNR integral is not finite")

    @property
    def grid(self):
        return self.h_sq.grid

    @classmethod
    def from_snr(cls, grid, gamma):
        """Channel with unit noise and ``|H|^2`` equal to ``gamma``."""
        return cls(Spectrum(grid, gamma), noise_psd(grid, 1.0))

    def snr(self):
        return snr(self)


def snr(channel):
    """Pointwise SNR ``|H(f)|^2 / S(f)`` as a real spectrum."""
    if channel.h_sq.grid != channel.noise.grid:
        raise GridMismatchError("channel gain and noise PSD use different grids")
    return Spectrum(channel.grid, channel.h_sq.values / channel.noise.values)


def integrate(spectrum, spectral_set):
    """Midpoint-rule integral of a real spectrum over a spectral set."""
    if spectrum.complex_valued:
        raise DomainError("integrate expects a real spectrum")
    weights = spectral_set.overlap_weights(spectrum.grid)
    mask = weights > 0
    return math.fsum(spectrum.values[mask] * weights[mask])


def landau_rate(spectral_set):
    """Landau rate of signals occupying ``spectral_set``: its measure."""
    return spectral_set.measure


# Channel families.  Piecewise-constant families store exact bin averages,
# smooth ones are sampled at bin centers.

def _band_average(grid, a, b):
    return SpectralSet.interval(max(a, -grid.f_max), min(b, grid.f_max)).overlap_weights(grid) / grid.df


def flat_channel(grid, gain, bandwidth, noise=1.0, center=0.0):
    """``gamma = gain`` on ``[center - W/2, center + W/2)``, zero elsewhere."""
    if gain < 0 or bandwidth < 0:
        raise DomainError("gain and bandwidth must be nonnegative")
    frac = _band_average(grid, center - bandwidth / 2, center + bandwidth / 2)
    return Channel(Spectrum(grid, gain * noise * frac), noise_psd(grid, noise))


def triangle_channel(grid, peak=1.0, half_width=None, noise=1.0):
    """``gamma(f) = peak * (1 - |f| / half_width)^+``."""
    half_width = grid.f_max if half_width is None else half_width
    if peak < 0 or half_width <= 0:
        raise DomainError("peak must be nonnegative and half_width positive")
    gamma = peak * np.clip(1.0 - np.abs(grid.centers) / half_width, 0.0, None)
    return Channel(Spectrum(grid, gamma * noise), noise_psd(grid, noise))


def two_band_channel(grid, inner_gain, outer_gain, split, edge=None, noise=1.0):
    """Symmetric two-level channel.

    ``gamma = inner_gain`` for ``|f| < split`` and ``outer_gain`` for
    ``split <= |f| < edge`` (``edge`` defaults to ``f_max``).
    """
    edge = grid.f_max if edge is None else edge
    if inner_gain < 0 or outer_gain < 0 or not 0 <= split <= edge:
        raise DomainError("invalid two-band parameters")
    inner = _band_average(grid, -split, split)
    outer = _band_average(grid, -edge, edge) - inner
    gamma = inner_gain * inner + outer_gain * outer
    return Channel(Spectrum(grid, gamma * noise), noise_psd(grid, noise))


def gaussian_channel(grid, peak=1.0, sigma=None, center=0.0, noise=1.0):
    """``gamma(f) = peak * exp(-(f - center)^2 / (2 sigma^2))``."""
    sigma = grid.f_max / 4 if sigma is None else sigma
    if peak < 0 or sigma <= 0:
        raise DomainError("peak must be nonnegative and sigma positive")
    gamma = peak * np.exp(-((grid.centers - center) ** 2) / (2.0 * sigma ** 2))
    return Channel(Spectrum(grid, gamma * noise), noise_psd(grid, noise))


def piecewise_channel(grid, segments, noise_floor=1.0):
    """Channel from ``(interval, h_sq, noise)`` segments.

    Bins not covered by any segment get ``h_sq = 0`` and ``noise_floor``.
    Partially covered bins receive overlap-weighted averages.
    """
    h_sq = np.zeros(grid.n_bins)
    noise = np.zeros(grid.n_bins)
    covered = np.zeros(grid.n_bins)
    for (a, b), h, s in segments:
        if h < 0 or s <= 0:
            raise DomainError(f"segment [{a}, {b}) has invalid h_sq={h} or noise={s}")
        frac = SpectralSet.interval(a, b).overlap_weights(grid) / grid.df
        h_sq += h * frac
        noise += s * frac
        covered += frac
    if np.any(covered > 1 + 1e-9):
        raise DomainError("piecewise segments overlap")
    noise += noise_floor * np.clip(1.0 - covered, 0.0, None)
    return Channel(Spectrum(grid, h_sq), noise_psd(grid, noise))
