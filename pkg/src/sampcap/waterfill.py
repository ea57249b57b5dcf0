"""Water-filling power allocation over weighted parallel components.

A component ``i`` has gain ``gamma_i`` (SNR per unit power) and weight
``w_i`` (bandwidth in Hz, or ``1/2T`` for finite-horizon eigenvalues).
The water level ``nu`` solves ``sum_i w_i [nu - 1/gamma_i]^+ = P`` and the
capacity is ``sum_i w_i * 0.5 * ln(nu * gamma_i)^+`` in nats per second.
The level is found in closed form by scanning the sorted breakpoints
``1/gamma_i``, so no iteration tolerance is involved.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, InfeasibleError

__all__ = ["WaterfillSolution", "waterfill_weighted", "waterfill_spectrum"]


@dataclass(frozen=True, eq=False)
class WaterfillSolution:
    """Result of a water-filling problem.

    Attributes
    ----------
    nu : float
        Water level.  ``inf`` only when ``P == 0`` and every gain is zero.
    capacity : float
        Capacity in nats per second.
    ids : ndarray of int
        Component identifiers (bin indices, flat eigenvalue indices, ...).
    weights : ndarray
        Component weights in Hz.
    gains : ndarray
        Component gains.
    power : ndarray
        Allocated power spectral density ``[nu - 1/gamma]^+`` per component.
    """

    nu: float
    capacity: float
    ids: np.ndarray
    weights: np.ndarray
    gains: np.ndarray
    power: np.ndarray

    @property
    def capacity_bits(self):
        return self.capacity / math.log(2.0)

    @property
    def total_power(self):
        return math.fsum(self.weights * self.power)

    @property
    def active(self):
        return self.power > 0

    @property
    def allocation(self):
        """List of ``(id, weight, power density)`` tuples."""
        return [(int(i), float(w), float(p))
                for i, w, p in zip(self.ids, self.weights, self.power)]


def waterfill_weighted(gains, weights, power, ids=None):
    """Solve the weighted water-filling problem exactly.

    Parameters
    ----------
    gains : array_like
        Nonnegative component gains ``gamma_i``.
    weights : array_like
        Nonnegative component weights ``w_i`` (broadcast against gains).
    power : float
        Total power budget ``P >= 0``.
    ids : array_like of int, optional
        Identifiers reported back in the solution; defaults to positions.

    Returns
    -------
    WaterfillSolution

    Raises
    ------
    DomainError
        Negative or non-finite gains, weights or power.
    InfeasibleError
        ``P > 0`` but no component has both positive gain and weight.
    """
    gains = np.atleast_1d(np.asarray(gains, dtype=float))
    try:
        weights = np.broadcast_to(np.asarray(weights, dtype=float), gains.shape).copy()
    except ValueError as exc:
        raise DomainError("weights do not match the gains") from exc
    ids = np.arange(gains.size) if ids is None else np.asarray(ids)
    power = float(power)
    if gains.ndim != 1 or ids.shape != gains.shape:
        raise DomainError("gains, weights and ids must be one-dimensional and aligned")
    if not (np.all(np.isfinite(gains)) and np.all(np.isfinite(weights))):
        raise DomainError("gains and weights must be finite")
    if np.any(gains < 0) or np.any(weights < 0):
        raise DomainError("gains and weights must be nonnegative")
    if not (math.isfinite(power) and power >= 0):
        raise DomainError(f"power must be finite and nonnegative, got {power}")

    alloc = np.zeros(gains.size)
    # Subnormal gains whose reciprocal overflows can never receive power.
    with np.errstate(divide="ignore", over="ignore"):
        reachable = np.isfinite(1.0 / gains)
    usable = np.flatnonzero((gains > 0) & (weights > 0) & reachable)
    if usable.size == 0:
        if power > 0:
            raise InfeasibleError("positive power but every component has zero gain")
        return WaterfillSolution(math.inf, 0.0, ids, weights, gains, alloc)

    # Strongest component first; ties keep their original order.
    order = usable[np.argsort(-gains[usable], kind="stable")]
    inv = 1.0 / gains[order]
    w = weights[order]
    if power == 0:
        return WaterfillSolution(float(inv[0]), 0.0, ids, weights, gains, alloc)

    # Work relative to the strongest breakpoint so that tiny gains (huge
    # 1/gamma) do not swallow the power budget in rounding.
    d = inv - inv[0]
    rel = (power + np.cumsum(w * d)) / np.cumsum(w)
    # The active prefix is the longest one whose level clears its own
    # weakest breakpoint; the condition is monotone in the prefix length.
    clears = rel > d
    clears[0] = True
    k = int(np.flatnonzero(clears)[-1]) + 1
    nu = float(inv[0] + rel[k - 1])
    active = order[:k]
    alloc[active] = rel[k - 1] - d[:k]
    capacity = math.fsum(0.5 * w[:k] * np.log1p(alloc[active] * gains[active]))
    return WaterfillSolution(nu, capacity, ids, weights, gains, alloc)


def waterfill_spectrum(gamma, spectral_set, power):
    """Water-fill a real SNR spectrum over a spectral set.

    Each grid bin touched by ``spectral_set`` becomes one component whose
    weight is the overlap width, so the capacity is the midpoint-rule value
    of ``int_set 0.5 ln(nu gamma(f))^+ df``.
    """
    if gamma.complex_valued:
        raise DomainError("waterfill_spectrum expects a real SNR spectrum")
    weights = spectral_set.overlap_weights(gamma.grid)
    bins = np.flatnonzero(weights > 0)
    return waterfill_weighted(gamma.values[bins], weights[bins], power, ids=bins)
