"""Capacity of periodic sampling systems.

A periodic sampler takes ``M`` samples per period ``T_q``.  Sample phase
``k`` is taken at ``t_k + n T_q`` through a response ``R_k(f)`` measured
relative to the sampling instant.  Aliasing by the lattice ``f + l f_q``
(``f_q = 1/T_q``) turns the sampled channel into a family of ``M``-input
MIMO channels indexed by the base frequency ``f`` in ``[-f_q/2, f_q/2)``:

* ``F_q(f)`` is ``M x (2L+1)`` with entries ``Q_k(f + l f_q)``, where
  ``Q_k(f) = R_k(f) exp(2j pi f t_k)`` is the response in absolute time;
* ``F_h(f)`` is diagonal with entries ``sqrt(SNR(f + l f_q))``.

The capacity water-fills the eigenvalues of the noise-whitened matrix
``(F_q F_q^*)^{-1/2} F_q F_h F_h^* F_q^* (F_q F_q^*)^{-1/2}`` jointly over
all base frequencies.  The rate ``f_q`` must be an integer multiple of the
grid spacing so that every alias falls on a bin center; aliases beyond the
grid carry exactly zero.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from .capacity import select_max_snr_set, upper_bound
from .errors import (DomainError, GridAlignmentError, GridMismatchError,
                     HypothesisError, NumericalError, PreconditionError,
                     RightInvertibilityError)
from .spectral import SpectralSet, Spectrum, snr
from .waterfill import waterfill_spectrum, waterfill_weighted

__all__ = [
    "PeriodicSampler",
    "AliasLayout",
    "AliasMatrices",
    "EigenProfile",
    "RightInvertibilityReport",
    "FilterbankBranch",
    "FilterbankDesign",
    "ModulationDesign",
    "bins_per_rate",
    "ideal_filter",
    "allpass_filter",
    "from_single_branch",
    "interleave_multibranch",
    "alias_layout",
    "build_alias_matrices",
    "correlation_fourier_series",
    "right_invertibility_check",
    "eigen_profile",
    "periodic_capacity",
    "periodic_capacity_equal_power",
    "corollary_bound",
    "design_filterbank",
    "design_modulation",
]

EPS_MIN = 1e-8
CLAMP_TOL = 1e-10
COLLISION_SHIFT = 2.0 ** -20


def bins_per_rate(grid, rate, what="rate"):
    """Number of grid bins spanned by ``rate``; it must be a whole number."""
    ratio = float(rate) / grid.df
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
        suggestion = max(1, m) * grid.df
        raise GridAlignmentError(
            f"{what} {rate:.12g} Hz is not a multiple of the bin width "
            f"{grid.df:.12g} Hz; nearest valid value is {suggestion:.12g} Hz",
            suggestion=suggestion)
    return m


def ideal_filter(grid, spectral_set):
    """Real 0/1 response passing ``spectral_set`` (partial bins fractional)."""
    return spectral_set.indicator(grid)


def allpass_filter(grid):
    return grid.constant(1.0)


@dataclass(frozen=True, eq=False)
class PeriodicSampler:
    """Sampler taking ``M`` samples per period at fixed offsets.

    Attributes
    ----------
    period : float
        ``T_q`` in seconds.
    offsets : ndarray
        Strictly increasing sampling offsets in ``[0, T_q)``.
    responses : ndarray, shape (M, n_bins)
        Complex response of each phase relative to its sampling instant.
    grid : FrequencyGrid
    descriptor : str
        Provenance tag.
    delays : ndarray
        Extra delay of each phase's kernel.  Nonzero only after offsets were
        nudged apart during interleaving, so that the nudged phase still
        produces exactly the original sample values.
    """

    period: float
    offsets: np.ndarray
    responses: np.ndarray
    grid: object
    descriptor: str = "custom"
    delays: np.ndarray = None

    def __post_init__(self):
        period = float(self.period)
        if not (math.isfinite(period) and period > 0):
            raise DomainError(f"period must be positive, got {self.period}")
        offsets = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        responses = np.atleast_2d(np.asarray(self.responses, dtype=complex))
        if offsets.ndim != 1 or offsets.size < 1:
            raise DomainError("a periodic sampler needs at least one offset")
        if responses.shape != (offsets.size, self.grid.n_bins):
            raise DomainError(
                f"responses have shape {responses.shape}, expected "
                f"({offsets.size}, {self.grid.n_bins})")
        if not np.all(np.isfinite(responses)):
            raise DomainError("sampler responses must be finite")
        if np.any(np.diff(offsets) <= 0):
            raise DomainError("offsets must be strictly increasing")
        if offsets[0] < 0 or offsets[-1] >= period:
            raise DomainError("offsets must lie in [0, period)")
        delays = np.zeros(offsets.size) if self.delays is None else \
            np.asarray(self.delays, dtype=float).reshape(offsets.shape)
        bins_per_rate(self.grid, 1.0 / period, "period rate f_q")
        for name, value in (("offsets", offsets), ("responses", responses),
                            ("delays", delays)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "period", period)

    @property
    def M(self):
        return self.offsets.size

    @property
    def f_q(self):
        return 1.0 / self.period

    @property
    def rate(self):
        return self.M / self.period

    def response(self, k):
        return Spectrum(self.grid, self.responses[k], complex_valued=True)


def from_single_branch(filt, f_s, offset=0.0):
    """Uniform sampler at rate ``f_s`` behind an LTI filter."""
    grid = filt.grid
    bins_per_rate(grid, f_s, "sampling rate")
    period = 1.0 / float(f_s)
    return PeriodicSampler(period, [offset], [np.asarray(filt.values)], grid,
                           "single_branch")


def interleave_multibranch(samplers):
    """Merge branches sharing one period into a single periodic sampler.

    Phases are sorted by offset.  A phase whose offset collides with an
    already placed one is moved by ``T_q * 2**-20``; its kernel is delayed
    by the same amount so the samples it produces are unchanged.
    """
    samplers = list(samplers)
    if not samplers:
        raise DomainError("need at least one branch")
    if len(samplers) == 1:
        return samplers[0]
    first = samplers[0]
    for s in samplers[1:]:
        if s.grid != first.grid:
            raise GridMismatchError("branches use different frequency grids")
        if abs(s.period - first.period) > 1e-12 * first.period:
            raise PreconditionError(
                f"branch periods differ ({first.period} vs {s.period}); "
                "resampling to a common period is not supported")
    period = first.period
    delta = period * COLLISION_SHIFT
    tol = 1e-12 * period
    placed = []
    for s in samplers:
        for t, d, r in zip(s.offsets, s.delays, s.responses):
            t, d = float(t), float(d)
            step = delta if t + delta < period else -delta
            while any(abs(t - u) <= tol for u, _, _ in placed):
                t += step
                d += step
            placed.append((t, d, r))
    placed.sort(key=lambda item: item[0])
    offsets, delays, responses = zip(*placed)
    return PeriodicSampler(period, offsets, np.array(responses), first.grid,
                           "interleaved", delays=delays)


def _branches(sampler):
    if isinstance(sampler, PeriodicSampler):
        return [sampler]
    branches = list(sampler)
    if not branches:
        raise DomainError("need at least one branch")
    for s in branches[1:]:
        if s.grid != branches[0].grid:
            raise GridMismatchError("branches use different frequency grids")
        if abs(s.period - branches[0].period) > 1e-12 * branches[0].period:
            raise PreconditionError("branches must share one period")
    return branches


def _absolute_responses(sampler):
    """Stack the absolute-time responses ``Q_k`` of all phases."""
    branches = _branches(sampler)
    centers = branches[0].grid.centers
    rows = []
    for s in branches:
        anchor = s.offsets - s.delays
        rows.append(s.responses * np.exp(2j * np.pi * np.outer(anchor, centers)))
    return branches[0], np.vstack(rows)


@dataclass(frozen=True, eq=False)
class AliasLayout:
    """Bookkeeping of which grid bin each alias ``f + l f_q`` falls on.

    ``index[b, l]`` is the grid bin of alias ``l - L`` of base bin ``b``,
    or ``-1`` when that alias lies outside the grid.
    """

    grid: object
    f_q: float
    m: int
    L: int
    base_freqs: np.ndarray
    index: np.ndarray

    @property
    def df(self):
        return self.grid.df


def alias_layout(grid, f_q):
    m = bins_per_rate(grid, f_q, "alias spacing f_q")
    n = grid.n_bins
    v0 = (n - m) // 2          # first virtual bin whose center is >= -f_q/2
    L = max(0, -(-v0 // m), -(-(n - v0 - m) // m))
    base = v0 + np.arange(m)
    index = base[:, None] + m * (np.arange(2 * L + 1)[None, :] - L)
    index = np.where((index >= 0) & (index < n), index, -1)
    base_freqs = grid.f_max * (2.0 * base + 1.0 - n) / n
    return AliasLayout(grid, m * grid.df, m, L, base_freqs, index)


@dataclass(frozen=True, eq=False)
class AliasMatrices:
    """Per-base-frequency alias matrices ``F_q(f)`` and ``diag F_h(f)``."""

    layout: AliasLayout
    fq: np.ndarray      # (n_base, M, 2L+1) complex
    fh: np.ndarray      # (n_base, 2L+1) real, nonnegative

    @property
    def base_freqs(self):
        return self.layout.base_freqs

    def fqq(self):
        """``F_q F_q^*`` at every base frequency."""
        return self.fq @ np.conj(np.swapaxes(self.fq, 1, 2))

    def fhq(self):
        """``F_q F_h F_h^* F_q^*`` at every base frequency."""
        weighted = self.fq * (self.fh ** 2)[:, None, :]
        return weighted @ np.conj(np.swapaxes(self.fq, 1, 2))


def build_alias_matrices(sampler, channel):
    """Alias matrices of a sampler (or list of branches) on a channel."""
    first, q_abs = _absolute_responses(sampler)
    if first.grid != channel.grid:
        raise GridMismatchError("sampler and channel use different grids")
    layout = alias_layout(channel.grid, first.f_q)
    valid = layout.index >= 0
    safe = np.where(valid, layout.index, 0)
    fq = np.where(valid[:, None, :], q_abs[:, safe].transpose(1, 0, 2), 0.0)
    gain = np.sqrt(snr(channel).values)
    fh = np.where(valid, gain[safe], 0.0)
    matrices = AliasMatrices(layout, fq, fh)
    qq = matrices.fqq()
    if np.max(np.abs(qq - np.conj(np.swapaxes(qq, 1, 2))), initial=0.0) > \
            1e-12 * max(1.0, np.max(np.abs(qq), initial=0.0)):
        raise NumericalError("F_q F_q^* is not Hermitian")
    return matrices


def correlation_fourier_series(sampler, channel):
    """Fourier series of the sampled output correlations.

    The cross-correlation between phase ``k`` and phase ``i`` delayed by
    ``l`` periods is computed on the full grid, without grouping aliases,
    for ``l = 0, ..., m-1``.  Summing the Fourier series of that sequence
    at each base frequency gives ``F_q F_h F_h^* F_q^*`` and ``F_q F_q^*``
    by an independent route.

    Returns
    -------
    (fhq, fqq) : tuple of ndarray, each (n_base, M, M)
    """
    first, q_abs = _absolute_responses(sampler)
    grid = channel.grid
    layout = alias_layout(grid, first.f_q)
    gamma = snr(channel).values
    lags = np.arange(layout.m) * first.period
    to_lag = np.exp(-2j * np.pi * np.outer(grid.centers, lags))          # (n, m)
    to_freq = np.exp(2j * np.pi * np.outer(lags, layout.base_freqs))     # (m, n_base)
    out = []
    for weight in (gamma, np.ones(grid.n_bins)):
        cross = q_abs[:, None, :] * np.conj(q_abs)[None, :, :] * weight
        corr = grid.df * cross @ to_lag                                  # (M, M, m)
        series = first.period * corr @ to_freq                           # (M, M, n_base)
        out.append(np.moveaxis(series, 2, 0))
    return tuple(out)


@dataclass(frozen=True)
class RightInvertibilityReport:
    sigma_min: float
    sigma_max: float
    worst_frequency: float
    threshold: float
    passed: bool


def right_invertibility_check(matrices, eps_min=EPS_MIN):
    """Smallest singular value of ``F_q F_q^*`` over the base grid.

    The check passes when it is at least ``eps_min`` times the largest one
    (and the sampler is not identically zero).
    """
    sv = np.linalg.eigvalsh(matrices.fqq())
    sv = np.clip(sv, 0.0, None)
    worst = int(np.argmin(sv[:, 0]))
    sigma_min = float(sv[worst, 0])
    sigma_max = float(np.max(sv))
    threshold = eps_min * sigma_max
    passed = sigma_max > 0 and sigma_min >= threshold
    return RightInvertibilityReport(sigma_min, sigma_max,
                                    float(matrices.base_freqs[worst]),
                                    threshold, bool(passed))


@dataclass(frozen=True, eq=False)
class EigenProfile:
    """Whitened eigenvalues per base frequency, sorted in descending order."""

    base_freqs: np.ndarray
    eigenvalues: np.ndarray   # (n_base, M)
    sigma_min: np.ndarray     # (n_base,)
    sigma_max: np.ndarray
    df: float

    @property
    def M(self):
        return self.eigenvalues.shape[1]


def _clamp(eigs, what):
    scale = max(1.0, float(np.max(np.abs(eigs), initial=0.0)))
    if np.min(eigs, initial=0.0) < -CLAMP_TOL * scale:
        raise NumericalError(
            f"{what} has eigenvalue {np.min(eigs):.3e} below -{CLAMP_TOL:g}")
    return np.clip(eigs, 0.0, None)


def eigen_profile(matrices, eps_min=EPS_MIN):
    """Eigenvalues of the noise-whitened channel at every base frequency.

    Raises
    ------
    RightInvertibilityError
        When ``F_q F_q^*`` is singular to within ``eps_min`` (relative).
    """
    sv, vecs = np.linalg.eigh(matrices.fqq())
    report = right_invertibility_check(matrices, eps_min)
    if not report.passed:
        raise RightInvertibilityError(
            f"sampler is not right-invertible: sigma_min(F_q F_q^*) = "
            f"{report.sigma_min:.3e} at base frequency "
            f"{report.worst_frequency:.6g} Hz (threshold {report.threshold:.3e})",
            frequency=report.worst_frequency, sigma_min=report.sigma_min,
            sigma_max=report.sigma_max)
    inv_sqrt = (vecs / np.sqrt(sv)[:, None, :]) @ np.conj(np.swapaxes(vecs, 1, 2))
    whitened = inv_sqrt @ matrices.fhq() @ inv_sqrt
    whitened = 0.5 * (whitened + np.conj(np.swapaxes(whitened, 1, 2)))
    eigs = _clamp(np.linalg.eigvalsh(whitened)[:, ::-1], "whitened channel matrix")
    return EigenProfile(matrices.base_freqs, eigs, sv[:, 0], sv[:, -1],
                        matrices.layout.df)


def periodic_capacity(sampler, channel, power, eps_min=EPS_MIN):
    """Capacity of a periodic sampler with optimal power allocation.

    Parameters
    ----------
    sampler : PeriodicSampler or sequence of PeriodicSampler
        A sequence is treated as parallel branches sharing one period.
    channel : Channel
    power : float
    eps_min : float
        Relative singular-value floor for right-invertibility.

    Returns
    -------
    (WaterfillSolution, EigenProfile)
    """
    profile = eigen_profile(build_alias_matrices(sampler, channel), eps_min)
    gains = profile.eigenvalues.ravel()
    solution = waterfill_weighted(gains, profile.df, power)
    return solution, profile


def periodic_capacity_equal_power(sampler, channel, power, bandwidth,
                                  eps_min=EPS_MIN):
    """Capacity with power spread evenly at density ``P/W`` on ``[0, W]``.

    Requires the channel gain to vanish outside ``[0, W]``.
    """
    grid = channel.grid
    inside = SpectralSet.interval(0.0, bandwidth).overlap_weights(grid)
    outside = inside < grid.df * (1 - 1e-9)
    if np.any(channel.h_sq.values[outside] > 0):
        raise HypothesisError(
            f"channel gain is nonzero outside [0, {bandwidth}] Hz; the "
            "equal-power formula needs H supported there")
    if power < 0:
        raise DomainError("power must be nonnegative")
    profile = eigen_profile(build_alias_matrices(sampler, channel), eps_min)
    if power == 0:
        return 0.0
    terms = 0.5 * np.log1p(power / bandwidth * profile.eigenvalues)
    return math.fsum(profile.df * terms.ravel())


def corollary_bound(channel, f_q, f_s, power):
    """Bound using only the ``M = f_s/f_q`` best aliases of each base bin."""
    layout = alias_layout(channel.grid, f_q)
    ratio = f_s / layout.f_q
    M = int(round(ratio))
    if M < 1 or abs(ratio - M) > 1e-9 * ratio:
        raise GridAlignmentError(
            f"f_s = {f_s} Hz is not an integer multiple of f_q = {layout.f_q} Hz",
            suggestion=max(1, M) * layout.f_q)
    gamma = snr(channel).values
    valid = layout.index >= 0
    alias_gains = np.where(valid, gamma[np.where(valid, layout.index, 0)], 0.0)
    best = -np.sort(-alias_gains, axis=1)[:, :M]
    if best.shape[1] < M:
        best = np.pad(best, ((0, 0), (0, M - best.shape[1])))
    return waterfill_weighted(best.ravel(), layout.df, power)


@dataclass(frozen=True)
class FilterbankBranch:
    band: SpectralSet
    rate: float


@dataclass(frozen=True)
class FilterbankDesign:
    """One ideal band-pass branch per interval of the maximal-SNR set."""

    branches: tuple

    @property
    def total_rate(self):
        return math.fsum(b.rate for b in self.branches)

    @property
    def passband(self):
        out = SpectralSet()
        for b in self.branches:
            out = out.union(b.band)
        return out

    def samplers(self, grid):
        """Express the design as parallel periodic branches on ``grid``.

        All branch rates must be whole multiples of the bin width.  The
        common period is the inverse of their greatest common divisor and
        branch ``k`` contributes ``rate_k T_q`` equally spaced phases.
        """
        counts = [bins_per_rate(grid, b.rate, "branch rate") for b in self.branches]
        g = 0
        for c in counts:
            g = math.gcd(g, c)
        period = 1.0 / (g * grid.df)
        out = []
        for branch, c in zip(self.branches, counts):
            M = c // g
            resp = np.tile(ideal_filter(grid, branch.band).values, (M, 1))
            out.append(PeriodicSampler(period, np.arange(M) * period / M, resp,
                                       grid, "filterbank"))
        return out


def design_filterbank(channel, f_s, power):
    """Filterbank achieving the upper bound.

    Returns
    -------
    (FilterbankDesign, WaterfillSolution)
        The solution water-fills the SNR over the union of the branch bands.
    """
    b_m = select_max_snr_set(channel, f_s)
    branches = tuple(FilterbankBranch(SpectralSet.interval(a, b), b - a)
                     for a, b in b_m.intervals)
    design = FilterbankDesign(branches)
    solution = waterfill_spectrum(snr(channel), design.passband, power)
    return design, solution


@dataclass(frozen=True)
class ModulationDesign:
    """Pre-filter, periodic modulation and post-filter ahead of one sampler.

    Attributes
    ----------
    pre_filter : SpectralSet
        Passband of the pre-filter (the selected subbands).
    coefficients : dict
        ``l -> c_l``: the modulating sequence has spectrum
        ``sum_l c_l delta(f - l f_s / N)``.
    post_filter : SpectralSet
        Passband of the post-filter, ``N`` adjacent slots of width ``f_s/N``.
    rate : float
        Output sampling rate ``f_s``.
    n_subbands : int
    assignment : tuple of (subband index, slot index)
        Lattice indices: subband ``k`` is ``[k b, (k+1) b)`` with ``b = f_s/N``.
    """

    pre_filter: SpectralSet
    coefficients: dict
    post_filter: SpectralSet
    rate: float
    n_subbands: int
    assignment: tuple

    @property
    def subband_width(self):
        return self.rate / self.n_subbands

    def shifts(self):
        return {k: s - k for k, s in self.assignment}

    def to_sampler(self, grid):
        """The modulation chain as a periodic sampler with ``M = N``."""
        N = self.n_subbands
        b = self.subband_width
        mb = bins_per_rate(grid, b, "subband width")
        period = 1.0 / b
        times = np.arange(N) / self.rate
        pre = ideal_filter(grid, self.pre_filter).values
        post = ideal_filter(grid, self.post_filter).values
        n = grid.n_bins
        idx = np.arange(n)
        responses = np.zeros((N, n), dtype=complex)
        for l, c in self.coefficients.items():
            shifted = idx + l * mb
            ok = (shifted >= 0) & (shifted < n)
            post_shift = np.where(ok, post[np.where(ok, shifted, 0)], 0.0)
            phase = np.exp(2j * np.pi * l * b * times)
            responses += c * phase[:, None] * (pre * post_shift)[None, :]
        return PeriodicSampler(period, times, responses, grid, "modulation_chain")


def _subband_lattice(grid, width):
    """Whole lattice subbands ``[k w, (k+1) w)`` inside the grid, as bin ranges."""
    mb = bins_per_rate(grid, width, "subband width")
    half = grid.n_bins // 2
    k_lo = -(half // mb)
    k_hi = (grid.n_bins - half) // mb
    ks = np.arange(k_lo, k_hi)
    return mb, ks, half + ks * mb


def _cross_hits(subbands, shifts, lo, hi):
    used = set(shifts)
    hits = 0
    for k, own in zip(subbands, shifts):
        hits += sum(1 for l in used if l != own and lo <= k + l < hi)
    return hits


def design_modulation(channel, f_s, n_subbands, power, eps_design=1e-6):
    """Single-branch modulation design for piecewise-flat channels.

    The channel SNR must be constant on every lattice subband of width
    ``b = f_s / N``.  The ``N`` best subbands are passed by the pre-filter,
    each is moved to a distinct slot of the post-filter band by one
    modulation coefficient, and the result is sampled uniformly at
    ``f_s``.  Slot assignments that avoid cross-terms between subbands are
    preferred.

    Returns
    -------
    (ModulationDesign, WaterfillSolution)
        The solution comes from :func:`periodic_capacity` applied to the
        composed chain.
    """
    grid = channel.grid
    N = int(n_subbands)
    if N < 1:
        raise DomainError("need at least one subband")
    if f_s <= 0 or f_s > 2 * grid.f_max * (1 + 1e-12):
        raise DomainError(f"invalid sampling rate {f_s}")
    width = f_s / N
    mb, ks, starts = _subband_lattice(grid, width)
    gamma = snr(channel).values
    covered = np.zeros(grid.n_bins, dtype=bool)
    levels = []
    for start in starts:
        seg = gamma[start:start + mb]
        covered[start:start + mb] = True
        if np.ptp(seg) > 1e-9 * max(float(np.max(gamma)), 1e-300):
            raise PreconditionError(
                f"SNR is not constant on subband [{grid.edges[start]:.6g}, "
                f"{grid.edges[start + mb]:.6g}) Hz")
        levels.append(float(seg[0]))
    if np.any(gamma[~covered] > 0):
        raise PreconditionError("nonzero SNR on grid bins outside whole lattice subbands")
    if len(ks) < N:
        raise PreconditionError("fewer lattice subbands than requested")
    order = np.argsort(-np.asarray(levels), kind="stable")
    chosen = sorted(int(ks[i]) for i in order[:N])

    # Post-filter slots: [0, f_s) when it fits in the grid, else centered.
    lo = 0 if f_s <= grid.f_max * (1 + 1e-12) else -(N // 2)
    if lo * width < -grid.f_max * (1 + 1e-12) or (lo + N) * width > grid.f_max * (1 + 1e-12):
        raise PreconditionError("post-filter band does not fit in the grid")
    hi = lo + N
    fixed = {k: k for k in chosen if lo <= k < hi}
    movers = [k for k in chosen if k not in fixed]
    free = [s for s in range(lo, hi) if s not in fixed.values()]

    best = None
    candidates = itertools.permutations(free) if len(movers) <= 7 else [tuple(free)]
    for perm in candidates:
        slots = dict(fixed)
        slots.update(zip(movers, perm))
        shifts = [slots[k] - k for k in chosen]
        hits = _cross_hits(chosen, shifts, lo, hi)
        if best is None or hits < best[0]:
            best = (hits, slots)
            if hits == 0:
                break
    slots = best[1]
    shifts = sorted({slots[k] - k for k in chosen})
    pre = SpectralSet(tuple((k * width, (k + 1) * width) for k in chosen))
    post = SpectralSet.interval(lo * width, hi * width)
    assignment = tuple((k, slots[k]) for k in chosen)

    c_u = upper_bound(channel, f_s, power).capacity
    rng = np.random.default_rng(0)
    patterns = [np.ones(len(shifts)), 0.5 ** np.arange(len(shifts))]
    patterns += [np.exp(2j * np.pi * rng.random(len(shifts))) for _ in range(4)]
    last_error = None
    for coeffs in patterns:
        design = ModulationDesign(pre, {l: complex(c) for l, c in zip(shifts, coeffs)},
                                  post, float(f_s), N, assignment)
        try:
            solution, _ = periodic_capacity(design.to_sampler(grid), channel, power)
        except RightInvertibilityError as exc:
            last_error = exc
            continue
        if solution.capacity < c_u - eps_design * max(1.0, c_u):
            raise NumericalError(
                f"modulation design reaches {solution.capacity:.12g} nats/s, "
                f"below the bound {c_u:.12g}")
        return design, solution
    raise last_error
