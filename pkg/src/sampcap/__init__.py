"""Capacity of Gaussian channels under sub-Nyquist sampling."""

from .errors import *  # noqa: F401,F403
from .spectral import (FrequencyGrid, Spectrum, SpectralSet, Channel,
                       noise_psd, snr, integrate, landau_rate, flat_channel,
                       triangle_channel, two_band_channel, gaussian_channel,
                       piecewise_channel)
from .waterfill import WaterfillSolution, waterfill_weighted, waterfill_spectrum
from .capacity import (UpperBoundResult, select_max_snr_set, upper_bound,
                       capacity_sweep)
from .periodic import (PeriodicSampler, from_single_branch,
                       interleave_multibranch, build_alias_matrices,
                       right_invertibility_check, periodic_capacity,
                       periodic_capacity_equal_power, corollary_bound,
                       design_filterbank, design_modulation, ideal_filter,
                       allpass_filter)

__version__ = "0.1.0"
