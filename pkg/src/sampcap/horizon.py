"""Finite-horizon time-domain evaluation of sampled capacity.

Samples taken at times ``t_k`` through kernels ``q(t_k, tau)`` see a
channel with impulse response ``g = F^{-1}(H / sqrt(S))``.  The noise and
signal covariances of the samples are the Gram matrices

    R_q[k, l]  = int q(t_k, tau) q*(t_l, tau) dtau
    R_hq[k, l] = int s(t_k, tau) s*(t_l, tau) dtau,
    s(t_k, tau) = int g(tau' - tau) q(t_k, tau') dtau',

and the capacity over a horizon of length ``2T`` water-fills the
eigenvalues of ``R_q^{-1/2} R_hq R_q^{-1/2}`` with weight ``1/(2T)`` each.

Everything here is computed in the time domain.  Spectra on the grid are
piecewise constant, hence the kernels are band-limited to ``f_max`` and are
sampled at ``dt = 1/(2 f_max)``, where the trapezoid rule is exact up to
the truncation of the kernel support; that truncation is measured and
reported as an energy loss.
"""

from dataclasses import dataclass, replace
import math
import warnings

import numpy as np

from .errors import (DomainError, NumericalError, PreconditionError,
                     RightInvertibilityError)
from .spectral import snr
from .waterfill import waterfill_weighted

__all__ = [
    "SamplingSet",
    "BeurlingEstimate",
    "TimeKernel",
    "GramMatrices",
    "FiniteCapacity",
    "TruncationReport",
    "KadecReport",
    "ConvergenceRow",
    "beurling_density",
    "gram_matrices",
    "finite_capacity",
    "truncation_comparison",
    "kadec_perturbation_test",
    "convergence_study",
    "sampler_kernel",
    "sampler_sampling_set",
    "filter_kernel",
]

EPS_MIN = 1e-8
CLAMP_TOL = 1e-10
TAIL_TOL = 1e-10
MAX_SUPPORT = 2048


@dataclass(frozen=True)
class SamplingSet:
    """Generator of a sampling set ``{t_n}``.

    Use the ``uniform``, ``periodic``, ``jittered`` and ``explicit``
    constructors.  ``materialize(T)`` lists the samples whose nominal
    position lies in ``[-T, T)``; ``phases(T)`` gives the phase index of each
    of those samples (always 0 except for periodic sets).
    """

    kind: str
    rate: float = None
    period: float = None
    offsets: tuple = ()
    bound: float = 0.0
    seed: int = 0
    deviations: tuple = None
    times: tuple = ()

    @classmethod
    def uniform(cls, rate, phase=0.0):
        if rate <= 0:
            raise DomainError("rate must be positive")
        return cls("uniform", rate=float(rate), offsets=(float(phase),))

    @classmethod
    def periodic(cls, period, offsets):
        offsets = tuple(float(t) for t in offsets)
        if period <= 0 or not offsets:
            raise DomainError("need a positive period and at least one offset")
        if any(b <= a for a, b in zip(offsets, offsets[1:])) or offsets[0] < 0 \
                or offsets[-1] >= period:
            raise DomainError("offsets must be strictly increasing in [0, period)")
        return cls("periodic", period=float(period), offsets=offsets)

    @classmethod
    def jittered(cls, rate, bound, seed=0, deviations=None):
        """``t_n = n / rate + delta_n`` with ``|delta_n| <= bound``.

        Deviations are drawn uniformly from ``[-bound, bound]`` with a
        generator keyed on ``(seed, n)``, so a sample keeps its time when the
        window changes.  Explicit ``deviations`` are used cyclically with
        Python indexing, ``delta_n = deviations[n % len(deviations)]``.
        """
        if rate <= 0 or bound < 0:
            raise DomainError("rate must be positive and bound nonnegative")
        if bound >= 0.5 / rate:
            raise DomainError("jitter bound must stay below half the sampling interval")
        if deviations is not None:
            deviations = tuple(float(d) for d in deviations)
            if any(abs(d) > bound for d in deviations):
                raise DomainError("explicit deviation exceeds the jitter bound")
        return cls("jittered", rate=float(rate), bound=float(bound), seed=int(seed),
                   deviations=deviations)

    @classmethod
    def explicit(cls, times):
        return cls("explicit", times=tuple(sorted(float(t) for t in times)))

    @property
    def density(self):
        """Exact Beurling density, or None for explicit sets."""
        if self.kind in ("uniform", "jittered"):
            return self.rate
        if self.kind == "periodic":
            return len(self.offsets) / self.period
        return None

    @staticmethod
    def _indices(T, step, shift=0.0):
        """Integers ``n`` with ``shift + n step`` in ``[-T, T)``."""
        return np.arange(math.ceil((-T - shift) / step - 1e-9),
                         math.ceil((T - shift) / step - 1e-9))

    def _deviation(self, n):
        if self.deviations is not None:
            return self.deviations[n % len(self.deviations)] if self.deviations else 0.0
        if self.bound == 0:
            return 0.0
        rng = np.random.default_rng([self.seed, int(n) % (1 << 32), int(n < 0)])
        return float(rng.uniform(-self.bound, self.bound))

    def _table(self, T):
        if self.kind == "uniform":
            phase = self.offsets[0]
            n = self._indices(T, 1.0 / self.rate, phase)
            return n / self.rate + phase, np.zeros(n.size, dtype=int)
        if self.kind == "jittered":
            n = self._indices(T, 1.0 / self.rate)
            dev = np.array([self._deviation(int(k)) for k in n])
            return n / self.rate + dev, np.zeros(n.size, dtype=int)
        if self.kind == "periodic":
            times, phases = [], []
            for k, t in enumerate(self.offsets):
                n = self._indices(T, self.period, t)
                times.append(t + n * self.period)
                phases.append(np.full(n.size, k))
            times, phases = np.concatenate(times), np.concatenate(phases)
            order = np.argsort(times, kind="stable")
            return times[order], phases[order]
        times = np.array(self.times)
        keep = (times >= -T) & (times < T)
        return times[keep], np.zeros(int(keep.sum()), dtype=int)

    def materialize(self, T):
        return self._table(T)[0]

    def phases(self, T):
        return self._table(T)[1]


@dataclass(frozen=True)
class BeurlingEstimate:
    d_plus: float
    d_minus: float
    exact: float
    asymptotic: bool


def beurling_density(sampling_set, r, z_samples=256, span=None):
    """Upper and lower sample densities over windows of length ``r``.

    Windows ``[z, z + r]`` start at ``z_samples`` evenly spaced positions
    covering ``[-span, span - r]`` (``span`` defaults to ``8 r``; explicit
    sets use their own extent).  For generated sets the exact limit is
    returned alongside the finite-window estimates.
    """
    if r <= 0:
        raise DomainError("window length must be positive")
    if sampling_set.kind == "explicit":
        times = np.array(sampling_set.times)
        if times.size == 0:
            return BeurlingEstimate(0.0, 0.0, None, False)
        lo, hi = times[0], max(times[-1], times[0] + r) - r
    else:
        span = 8.0 * r if span is None else float(span)
        times = sampling_set.materialize(span + r)
        lo, hi = -span, span - r
    starts = np.linspace(lo, hi, max(int(z_samples), 1))
    counts = np.searchsorted(times, starts + r, side="right") - \
        np.searchsorted(times, starts, side="left")
    exact = sampling_set.density
    return BeurlingEstimate(float(counts.max() / r), float(counts.min() / r),
                            exact, exact is not None)


def _sinc_sum(grid, values, u0, count):
    """Band-limited kernel ``k(u) = int V(f) e^{2j pi f u} df`` at ``u0 - i dt``.

    ``V`` is piecewise constant on the grid bins, which gives the exact form
    ``k(u) = sinc(df u) sum_j V_j df e^{2j pi c_j u}``.  On the ``dt`` lattice
    the sum is a length-``n`` DFT, so evaluation costs one FFT per call.
    """
    n = grid.n_bins
    dt = 0.5 / grid.f_max
    i = np.arange(count)
    w = values * grid.df * np.exp(2j * np.pi * grid.centers * u0)
    spectrum = np.fft.fft(w)
    # exp(-2j pi c_j i dt) = exp(-2j pi i j / n) * exp(j pi i (n - 1) / n)
    phase = np.exp(1j * np.pi * ((i * (n - 1)) % (2 * n)) / n)
    u = u0 - i * dt
    return np.sinc(grid.df * u) * phase * spectrum[i % n]


def _symmetric_kernel(grid, values, half):
    """Kernel on lags ``-half .. half`` (ascending)."""
    dt = 0.5 / grid.f_max
    return _sinc_sum(grid, values, half * dt, 2 * half + 1)[::-1]


def _support(grid, values, tol, max_points):
    """Smallest half-width (in samples) holding all but ``tol`` of the energy."""
    total = float(np.sum(np.abs(values) ** 2) * grid.df)
    if total == 0:
        return 0, 0.0
    dt = 0.5 / grid.f_max
    kern = _symmetric_kernel(grid, values, max_points)
    energy = np.abs(kern) ** 2 * dt
    centre = max_points
    inner = np.cumsum(np.concatenate(([energy[centre]],
                                      energy[centre + 1:] + energy[centre - 1::-1])))
    outside = total - inner
    ok = np.flatnonzero(outside <= tol * total)
    if ok.size:
        return int(ok[0]), max(float(outside[ok[0]]), 0.0) / total
    return max_points, max(float(outside[-1]), 0.0) / total


def _trapezoid(count, dt):
    w = np.full(count, dt)
    if count > 1:
        w[0] = w[-1] = dt / 2
    return w


@dataclass(frozen=True, eq=False)
class TimeKernel:
    """Sampler and channel kernels on the critical time lattice.

    Attributes
    ----------
    grid : FrequencyGrid
    responses : ndarray, shape (B, n_bins)
        Per-phase sampler responses relative to the sampling instant.
    delays : ndarray, shape (B,)
        Extra kernel delay per phase.
    dt : float
        Lattice step ``1 / (2 f_max)``.
    q_half : int
        Half-width, in samples, of the support kept around each sample time.
    q_energy_loss : float
        Worst relative energy lost by truncating a sampler kernel.
    g : ndarray
        Channel kernel on lags ``-g_half .. g_half``.
    g_energy_loss : float
        Relative energy of ``g`` lost to truncation of its lag support.
    tail_energy : float
        Energy of ``g`` removed by :meth:`truncated` (0 when untruncated).
    """

    grid: object
    responses: np.ndarray
    delays: np.ndarray
    dt: float
    q_half: int
    q_energy_loss: float
    g: np.ndarray
    g_energy_loss: float
    tail_energy: float = 0.0

    @classmethod
    def build(cls, channel, responses, delays=None, tail_tol=TAIL_TOL,
              max_support=MAX_SUPPORT):
        grid = channel.grid
        responses = np.atleast_2d(np.asarray(responses, dtype=complex))
        if responses.shape[1] != grid.n_bins:
            raise DomainError("responses do not match the channel grid")
        delays = np.zeros(responses.shape[0]) if delays is None else \
            np.asarray(delays, dtype=float)
        q_half, q_loss = 0, 0.0
        for r in responses:
            half, loss = _support(grid, r, tail_tol, max_support)
            q_half, q_loss = max(q_half, half), max(q_loss, loss)
        gain = np.sqrt(snr(channel).values)
        g_half, g_loss = _support(grid, gain, tail_tol, max_support)
        g = _symmetric_kernel(grid, gain, g_half)
        return cls(grid, responses, delays, 0.5 / grid.f_max, max(q_half, 1),
                   q_loss, g, g_loss)

    @property
    def g_half(self):
        return (self.g.size - 1) // 2

    @property
    def lags(self):
        return (np.arange(self.g.size) - self.g_half) * self.dt

    @property
    def channel_energy(self):
        """``C_g``: trapezoid value of ``int |g|^2`` on the kept lags."""
        return float(np.sum(_trapezoid(self.g.size, self.dt) * np.abs(self.g) ** 2))

    def truncated(self, half_width):
        """Copy with ``g`` set to zero for ``|t| > half_width``."""
        keep = np.abs(self.lags) <= half_width * (1 + 1e-12)
        weights = _trapezoid(self.g.size, self.dt)
        tail = float(np.sum(weights[~keep] * np.abs(self.g[~keep]) ** 2))
        return replace(self, g=np.where(keep, self.g, 0.0),
                       tail_energy=self.tail_energy + tail)

    def sampler_kernels(self, times, phases=None):
        """``q(t_k, tau_j)`` on a lattice ``tau_j`` covering every support.

        Returns
        -------
        (tau0, Q) : float, ndarray (K, N)
        """
        times = np.atleast_1d(np.asarray(times, dtype=float))
        phases = np.zeros(times.size, dtype=int) if phases is None else \
            np.asarray(phases, dtype=int)
        if times.size < 1:
            raise DomainError("need at least one sample time")
        anchors = times - self.delays[phases]
        lo = math.floor(anchors.min() / self.dt) - self.q_half
        hi = math.ceil(anchors.max() / self.dt) + self.q_half
        tau0 = lo * self.dt
        count = hi - lo + 1
        Q = np.empty((times.size, count), dtype=complex)
        for k, (a, p) in enumerate(zip(anchors, phases)):
            Q[k] = _sinc_sum(self.grid, self.responses[p], a - tau0, count)
        return tau0, Q


@dataclass(frozen=True, eq=False)
class GramMatrices:
    r_q: np.ndarray
    r_hq: np.ndarray
    q_energy_loss: float
    g_energy_loss: float


def _hermitian(matrix):
    return 0.5 * (matrix + matrix.conj().T)


def gram_matrices(kernel, times, phases=None, warn_tol=1e-3):
    """Noise and signal Gram matrices of the samples at ``times``."""
    _, Q = kernel.sampler_kernels(times, phases)
    w = _trapezoid(Q.shape[1], kernel.dt)
    r_q = _hermitian((Q * w) @ Q.conj().T)
    # s(t_k, tau_j) = sum_i w_i q(t_k, tau_i) g(tau_i - tau_j), a correlation
    # of each row with g, evaluated on the lattice extended by the lag span.
    g_rev = kernel.g[::-1] * kernel.dt
    length = Q.shape[1] + g_rev.size - 1
    nfft = 1 << (length - 1).bit_length()
    S = np.fft.ifft(np.fft.fft(Q * (w / kernel.dt), nfft, axis=1) *
                    np.fft.fft(g_rev, nfft)[None, :], axis=1)[:, :length]
    ws = _trapezoid(length, kernel.dt)
    r_hq = _hermitian((S * ws) @ S.conj().T)
    worst = max(kernel.q_energy_loss, kernel.g_energy_loss)
    if worst > warn_tol:
        warnings.warn(f"kernel support truncation loses {worst:.2e} of the "
                      "kernel energy", RuntimeWarning, stacklevel=2)
    return GramMatrices(r_q, r_hq, kernel.q_energy_loss, kernel.g_energy_loss)


@dataclass(frozen=True, eq=False)
class FiniteCapacity:
    """Finite-horizon capacity and the quantities behind it."""

    capacity: float
    eigenvalues: np.ndarray
    solution: object
    T: float
    trace_rate: float
    channel_energy: float
    gram: GramMatrices


def _whitened_eigenvalues(gram, eps_min):
    sv, vecs = np.linalg.eigh(gram.r_q)
    top = float(sv[-1]) if sv.size else 0.0
    if top <= 0 or sv[0] < eps_min * top:
        raise RightInvertibilityError(
            f"sample Gram matrix is singular: sigma_min = {sv[0]:.3e}, "
            f"sigma_max = {top:.3e}", sigma_min=float(sv[0]), sigma_max=top)
    inv_sqrt = (vecs / np.sqrt(sv)) @ vecs.conj().T
    eigs = np.linalg.eigvalsh(_hermitian(inv_sqrt @ gram.r_hq @ inv_sqrt))[::-1]
    scale = max(1.0, float(np.max(np.abs(eigs))))
    if eigs[-1] < -CLAMP_TOL * scale:
        raise NumericalError(f"whitened Gram matrix has eigenvalue {eigs[-1]:.3e}")
    return np.clip(eigs, 0.0, None)


def finite_capacity(kernel, times, T, power, phases=None, eps_min=EPS_MIN,
                    warn_tol=1e-3):
    """Capacity per unit time of the samples taken over a horizon ``2T``."""
    if T <= 0:
        raise DomainError("horizon must be positive")
    gram = gram_matrices(kernel, times, phases, warn_tol)
    eigs = _whitened_eigenvalues(gram, eps_min)
    solution = waterfill_weighted(eigs, 1.0 / (2.0 * T), power)
    return FiniteCapacity(solution.capacity, eigs, solution, float(T),
                          math.fsum(eigs) / (2.0 * T), kernel.channel_energy, gram)


@dataclass(frozen=True)
class TruncationReport:
    max_deviation: float
    trace_shift: float
    tail_energy: float
    channel_energy: float
    trace_bound: float

    @property
    def within_bound(self):
        return self.trace_shift <= self.trace_bound * (1 + 1e-9) + 1e-15


def truncation_comparison(kernel, truncated, times, T, phases=None,
                          eps_min=EPS_MIN):
    """Eigenvalue and trace deviation caused by truncating the channel kernel.

    ``trace_bound`` is ``xi + 2 sqrt(xi C_g)`` with ``xi`` the removed tail
    energy and ``C_g`` the energy of the full kernel.
    """
    full = _whitened_eigenvalues(gram_matrices(kernel, times, phases, np.inf), eps_min)
    cut = _whitened_eigenvalues(gram_matrices(truncated, times, phases, np.inf), eps_min)
    xi = truncated.tail_energy - kernel.tail_energy
    c_g = kernel.channel_energy
    shift = abs(math.fsum(full) - math.fsum(cut)) / (2.0 * T)
    return TruncationReport(float(np.max(np.abs(full - cut))), shift, xi, c_g,
                            xi + 2.0 * math.sqrt(max(xi, 0.0) * c_g))


@dataclass(frozen=True)
class KadecReport:
    unperturbed: float
    perturbed: float
    delta: float
    relative: float
    samples: int


def kadec_perturbation_test(kernel, base_rate, jitter, T, power, seed=0):
    """Capacity change when uniform samples are jittered by less than 1/4 period.

    Raises
    ------
    PreconditionError
        If ``jitter >= 1 / (4 base_rate)``, or the kernel is not a single
        filter whose passband fits in ``base_rate``.
    """
    if not 0 <= jitter < 0.25 / base_rate:
        raise PreconditionError(
            f"jitter {jitter:.6g} s violates |t_n - n/f_s| < 1/(4 f_s) = "
            f"{0.25 / base_rate:.6g} s")
    if kernel.responses.shape[0] != 1:
        raise PreconditionError("perturbation test needs a single-filter sampler")
    passband = np.count_nonzero(np.abs(kernel.responses[0]) > 0) * kernel.grid.df
    if passband > base_rate * (1 + 1e-9):
        raise PreconditionError(
            f"sampler passband {passband:.6g} Hz exceeds the rate {base_rate:.6g} Hz")
    uniform = SamplingSet.uniform(base_rate).materialize(T)
    jittered = SamplingSet.jittered(base_rate, jitter, seed).materialize(T) \
        if jitter > 0 else uniform
    c0 = finite_capacity(kernel, uniform, T, power).capacity
    c1 = finite_capacity(kernel, jittered, T, power).capacity
    delta = abs(c1 - c0)
    return KadecReport(c0, c1, delta, delta / c0 if c0 > 0 else 0.0, uniform.size)


def sampler_kernel(sampler, channel, **kwargs):
    """Time kernel of a periodic sampler or of a list of parallel branches."""
    branches = [sampler] if hasattr(sampler, "offsets") else list(sampler)
    responses = np.vstack([b.responses for b in branches])
    delays = np.concatenate([b.delays for b in branches])
    return TimeKernel.build(channel, responses, delays, **kwargs)


def sampler_sampling_set(sampler):
    """Sampling set of a periodic sampler, or of parallel branches.

    For branches the phase numbering follows :func:`sampler_kernel`:
    branch after branch, each in its own offset order.
    """
    branches = [sampler] if hasattr(sampler, "offsets") else list(sampler)
    period = branches[0].period
    offsets = np.concatenate([b.offsets for b in branches])
    return _LabelledPeriodicSet(period, tuple(offsets))


def filter_kernel(filt, channel, **kwargs):
    return TimeKernel.build(channel, np.asarray(filt.values)[None, :], **kwargs)


@dataclass(frozen=True)
class _LabelledPeriodicSet:
    """Periodic set whose phase labels follow a given, not necessarily sorted, order."""

    period: float
    offsets: tuple

    def _table(self, T):
        times, phases = [], []
        for k, t in enumerate(self.offsets):
            n = SamplingSet._indices(T, self.period, t)
            times.append(t + n * self.period)
            phases.append(np.full(n.size, k))
        return np.concatenate(times), np.concatenate(phases)

    def materialize(self, T):
        return self._table(T)[0]

    def phases(self, T):
        return self._table(T)[1]


@dataclass(frozen=True)
class ConvergenceRow:
    samples: int
    T: float
    finite: float
    periodic: float
    relative_error: float
    trace_rate: float
    channel_energy: float


def convergence_study(sampler, channel, power, sample_counts, periodic_value,
                      **kernel_kwargs):
    """Finite-horizon capacity along a schedule of sample counts.

    ``T`` is chosen so the horizon ``[-T, T)`` holds exactly the requested
    number of samples at the sampler's rate.
    """
    kernel = sampler_kernel(sampler, channel, **kernel_kwargs)
    sset = sampler_sampling_set(sampler)
    rate = sum(b.rate for b in ([sampler] if hasattr(sampler, "offsets") else sampler))
    rows = []
    for count in sample_counts:
        T = count / (2.0 * rate)
        times, phases = sset.materialize(T), sset.phases(T)
        result = finite_capacity(kernel, times, T, power, phases)
        err = abs(result.capacity - periodic_value) / periodic_value \
            if periodic_value > 0 else abs(result.capacity)
        rows.append(ConvergenceRow(int(times.size), T, result.capacity, periodic_value,
                                   err, result.trace_rate, result.channel_energy))
    return rows
