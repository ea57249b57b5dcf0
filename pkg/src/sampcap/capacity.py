"""Maximal-SNR spectral sets and the universal sampled-capacity bound.

For a sampling rate ``f_s`` the bound water-fills the SNR over the set of
measure ``f_s`` on which the SNR is largest.  On a grid that set is the
union of the best bins, the last one possibly taken only in part.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, RateExceedsGridError
from .spectral import SpectralSet, snr
from .waterfill import waterfill_spectrum

__all__ = ["UpperBoundResult", "select_max_snr_set", "upper_bound",
           "capacity_sweep", "SweepRow"]

# Relative slack used to snap f_s onto a whole number of bins.
_BIN_SNAP = 1e-9


@dataclass(frozen=True, eq=False)
class UpperBoundResult:
    """Upper bound on sampled capacity at rate ``f_s`` and power ``P``."""

    b_m: SpectralSet
    solution: object
    f_s: float
    P: float

    @property
    def capacity(self):
        return self.solution.capacity

    @property
    def nu(self):
        return self.solution.nu


def select_max_snr_set(channel, f_s):
    """Set of measure ``f_s`` carrying the largest integrated SNR.

    Bins are ranked by decreasing SNR with ties resolved towards lower
    frequency.  The first bin that does not fit entirely is included from
    its left edge up to the measure still missing.

    Raises
    ------
    DomainError
        If ``f_s <= 0``.
    RateExceedsGridError
        If ``f_s`` exceeds the grid bandwidth ``2 f_max``.
    """
    grid = channel.grid
    f_s = float(f_s)
    if not (math.isfinite(f_s) and f_s > 0):
        raise DomainError(f"sampling rate must be positive, got {f_s}")
    if f_s > 2 * grid.f_max * (1 + 1e-12):
        raise RateExceedsGridError(
            f"f_s = {f_s} Hz exceeds the grid bandwidth {2 * grid.f_max} Hz")
    gamma = snr(channel).values
    order = np.argsort(-gamma, kind="stable")
    ratio = f_s / grid.df
    whole = int(math.floor(ratio))
    if abs(ratio - round(ratio)) <= _BIN_SNAP * max(1.0, ratio):
        whole = int(round(ratio))
    whole = min(whole, grid.n_bins)
    edges = grid.edges
    intervals = [(edges[i], edges[i + 1]) for i in order[:whole]]
    remainder = f_s - whole * grid.df
    if whole < grid.n_bins and remainder > _BIN_SNAP * grid.df:
        i = order[whole]
        intervals.append((edges[i], edges[i] + remainder))
    return SpectralSet(tuple(intervals))


def upper_bound(channel, f_s, power):
    """Universal upper bound ``C_u(f_s, P)`` in nats per second."""
    if power < 0:
        raise DomainError(f"power must be nonnegative, got {power}")
    b_m = select_max_snr_set(channel, f_s)
    solution = waterfill_spectrum(snr(channel), b_m, power)
    return UpperBoundResult(b_m, solution, float(f_s), float(power))


@dataclass(frozen=True)
class SweepRow:
    f_s: float
    capacity: float
    nu: float
    measure: float


def capacity_sweep(channel, rates, power):
    """Evaluate the upper bound at every rate, keeping the input order."""
    rows = []
    for f_s in rates:
        result = upper_bound(channel, f_s, power)
        rows.append(SweepRow(float(f_s), result.capacity, result.nu, result.b_m.measure))
    return rows
