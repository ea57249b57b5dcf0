"""Run configuration: YAML parsing, validation and object construction.

Precedence, lowest first: built-in defaults, the ``--config`` file, then
command-line overrides (``--fs``, ``--power``, ``--seed``, ``--tol`` and
generic ``--set section.key=value``).
"""

from dataclasses import dataclass, field
import copy
import csv
import math
from fractions import Fraction

import numpy as np
import yaml

from .errors import ConfigError
from .horizon import SamplingSet
from .periodic import (PeriodicSampler, from_single_branch, ideal_filter,
                       interleave_multibranch)
from .spectral import (FrequencyGrid, SpectralSet, flat_channel,
                       gaussian_channel, piecewise_channel, triangle_channel,
                       two_band_channel)

__all__ = ["RunConfig", "load_config", "apply_override", "resolve_grid",
           "build_channel", "build_sampler", "build_sampling_set",
           "sampler_rates", "DEFAULTS"]

DEFAULTS = {
    "grid": {"f_max": 1.0, "n_bins": 64},
    "channel": {"family": "flat", "gain": 3.0},
    "power": 1.0,
    "f_s": 1.0,
    "sampler": None,
    "sampling_set": None,
    "sweep": {},
    "modulation": {"subbands": 2},
    "beurling": {"window": 10.0, "positions": 256},
    "verify": {},
    "eps_min": 1e-8,
    "seed": 0,
}

_TOP_KEYS = set(DEFAULTS)

_CHANNEL_KEYS = {
    "flat": {"gain", "bandwidth", "center", "noise"},
    "triangle": {"peak", "half_width", "noise"},
    "two_band": {"inner_gain", "outer_gain", "split", "edge", "noise"},
    "gaussian": {"peak", "sigma", "center", "noise"},
    "piecewise": {"segments", "noise_floor"},
}


@dataclass
class RunConfig:
    """Resolved configuration plus notes about automatic adjustments."""

    data: dict
    notes: list = field(default_factory=list)

    def section(self, name):
        value = self.data.get(name)
        return {} if value is None else value

    def echo(self):
        """Fully resolved configuration, including adjustment notes."""
        out = copy.deepcopy(self.data)
        out["adjustments"] = list(self.notes)
        return out


def _merge(base, extra, path=""):
    for key, value in extra.items():
        where = f"{path}{key}"
        if not path and key not in _TOP_KEYS:
            raise ConfigError(f"unknown top-level field '{where}'")
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value, where + ".")
        else:
            base[key] = value
    return base


def load_config(path=None):
    """Read a YAML config file and merge it over the defaults."""
    data = copy.deepcopy(DEFAULTS)
    if path is None:
        return RunConfig(data)
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"malformed YAML in {path}{where}: "
                          f"{getattr(exc, 'problem', exc)}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if "channel" in raw and isinstance(raw["channel"], dict):
        data["channel"] = {}
    return RunConfig(_merge(data, raw))


def apply_override(cfg, assignment):
    """Apply ``section.key=value``; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' must look like key=value")
    key, text = assignment.split("=", 1)
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override '{assignment}': bad value") from exc
    parts = key.strip().split(".")
    if parts[0] not in _TOP_KEYS:
        raise ConfigError(f"override '{assignment}': unknown field '{parts[0]}'")
    node = cfg.data
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value


def _number(section, key, path, default=None, positive=False, nonneg=False):
    value = section.get(key, default)
    if value is None:
        raise ConfigError(f"{path}.{key}: required field missing")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{path}.{key}: must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{path}.{key}: must be positive, got {value}")
    if nonneg and value < 0:
        raise ConfigError(f"{path}.{key}: must be nonnegative, got {value}")
    return value


def _interval(value, path):
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ConfigError(f"{path}: expected [low, high], got {value!r}")
    try:
        a, b = float(value[0]), float(value[1])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: endpoints must be numbers") from exc
    if not b > a:
        raise ConfigError(f"{path}: need low < high, got {value!r}")
    return a, b


def _check_keys(section, allowed, path):
    extra = set(section) - set(allowed)
    if extra:
        raise ConfigError(f"{path}: unknown field(s) {sorted(extra)}")


def grid_from(cfg, n_bins=None):
    g = cfg.section("grid")
    if not isinstance(g, dict):
        raise ConfigError("grid: expected a mapping")
    _check_keys(g, {"f_max", "n_bins"}, "grid")
    f_max = _number(g, "f_max", "grid", positive=True)
    n = g.get("n_bins") if n_bins is None else n_bins
    if isinstance(n, bool) or not isinstance(n, int) or n < 2 or n % 2:
        raise ConfigError(f"grid.n_bins: expected an even integer >= 2, got {n!r}")
    return FrequencyGrid(f_max, n)


def resolve_grid(cfg, rates, max_factor=64):
    """Grid whose bin width divides every rate in ``rates``.

    Starts from the configured ``n_bins`` and searches outward for the
    nearest even bin count that works.  Any change is recorded in
    ``cfg.notes`` and written back into the config.
    """
    grid = grid_from(cfg)
    rates = [float(r) for r in rates if r is not None]

    def fits(n):
        df = 2.0 * grid.f_max / n
        return all(abs(r / df - round(r / df)) <= 1e-9 * max(1.0, r / df)
                   and round(r / df) >= 1 for r in rates)

    n0 = grid.n_bins
    if fits(n0):
        return grid
    for step in range(1, max_factor * n0):
        for n in (n0 + 2 * step, n0 - 2 * step):
            if n >= 2 and fits(n):
                cfg.notes.append(
                    f"grid.n_bins changed from {n0} to {n} so that rates "
                    f"{rates} are whole multiples of the bin width")
                cfg.data["grid"]["n_bins"] = n
                return FrequencyGrid(grid.f_max, n)
    raise ConfigError(f"no grid near n_bins={n0} is commensurate with rates {rates}")


def build_channel(cfg, grid):
    ch = cfg.section("channel")
    if not isinstance(ch, dict):
        raise ConfigError("channel: expected a mapping")
    family = ch.get("family")
    if family not in _CHANNEL_KEYS:
        raise ConfigError(f"channel.family: expected one of {sorted(_CHANNEL_KEYS)}, "
                          f"got {family!r}")
    _check_keys(ch, _CHANNEL_KEYS[family] | {"family"}, "channel")
    p = "channel"
    noise = _number(ch, "noise", p, 1.0, positive=True) if family != "piecewise" else None
    if family == "flat":
        return flat_channel(grid, _number(ch, "gain", p, nonneg=True),
                            _number(ch, "bandwidth", p, 2 * grid.f_max, positive=True),
                            noise, _number(ch, "center", p, 0.0))
    if family == "triangle":
        return triangle_channel(grid, _number(ch, "peak", p, 1.0, nonneg=True),
                                _number(ch, "half_width", p, grid.f_max, positive=True),
                                noise)
    if family == "two_band":
        return two_band_channel(grid, _number(ch, "inner_gain", p, nonneg=True),
                                _number(ch, "outer_gain", p, nonneg=True),
                                _number(ch, "split", p, nonneg=True),
                                _number(ch, "edge", p, grid.f_max, positive=True),
                                noise)
    if family == "gaussian":
        return gaussian_channel(grid, _number(ch, "peak", p, 1.0, nonneg=True),
                                _number(ch, "sigma", p, grid.f_max / 4, positive=True),
                                _number(ch, "center", p, 0.0), noise)
    segments = ch.get("segments")
    if not isinstance(segments, list) or not segments:
        raise ConfigError("channel.segments: expected a non-empty list")
    parsed = []
    for i, seg in enumerate(segments):
        sp = f"channel.segments[{i}]"
        if not isinstance(seg, dict):
            raise ConfigError(f"{sp}: expected a mapping")
        _check_keys(seg, {"band", "h_sq", "noise"}, sp)
        parsed.append((_interval(seg.get("band"), sp + ".band"),
                       _number(seg, "h_sq", sp, nonneg=True),
                       _number(seg, "noise", sp, 1.0, positive=True)))
    return piecewise_channel(grid, parsed,
                             _number(ch, "noise_floor", p, 1.0, positive=True))


def _filter(spec, grid, f_s, path):
    if spec is None:
        spec = {"type": "lowpass"}
    if isinstance(spec, str):
        spec = {"type": spec}
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: expected a mapping or a filter name")
    kind = spec.get("type")
    if kind == "allpass":
        _check_keys(spec, {"type"}, path)
        return grid.constant(1.0)
    if kind == "lowpass":
        _check_keys(spec, {"type", "width"}, path)
        width = _number(spec, "width", path, f_s, positive=True)
        return ideal_filter(grid, SpectralSet.interval(-width / 2, width / 2))
    if kind == "bandpass":
        _check_keys(spec, {"type", "band"}, path)
        return ideal_filter(grid, SpectralSet((_interval(spec.get("band"), path + ".band"),)))
    if kind == "sets":
        _check_keys(spec, {"type", "bands"}, path)
        bands = spec.get("bands")
        if not isinstance(bands, list) or not bands:
            raise ConfigError(f"{path}.bands: expected a non-empty list")
        return ideal_filter(grid, SpectralSet(tuple(
            _interval(b, f"{path}.bands[{i}]") for i, b in enumerate(bands))))
    raise ConfigError(f"{path}.type: expected allpass, lowpass, bandpass or sets, "
                      f"got {kind!r}")


_SAMPLER_KEYS = {
    "single_branch": {"kind", "filter", "f_s", "offset"},
    "filterbank": {"kind", "branches", "period"},
    "interleaved": {"kind", "branches", "period"},
    "modulation": {"kind", "subbands", "f_s"},
    "custom_matrix": {"kind", "period", "offsets", "responses"},
}


def _sampler_section(cfg):
    s = cfg.section("sampler")
    if not s:
        return {"kind": "single_branch"}
    if not isinstance(s, dict):
        raise ConfigError("sampler: expected a mapping")
    kind = s.get("kind")
    if kind not in _SAMPLER_KEYS:
        raise ConfigError(f"sampler.kind: expected one of {sorted(_SAMPLER_KEYS)}, "
                          f"got {kind!r}")
    _check_keys(s, _SAMPLER_KEYS[kind], "sampler")
    return s


def _branch_specs(s):
    branches = s.get("branches")
    if not isinstance(branches, list) or not branches:
        raise ConfigError("sampler.branches: expected a non-empty list")
    out = []
    for i, b in enumerate(branches):
        path = f"sampler.branches[{i}]"
        if not isinstance(b, dict):
            raise ConfigError(f"{path}: expected a mapping")
        _check_keys(b, {"filter", "rate", "offset"}, path)
        out.append((b.get("filter"), _number(b, "rate", path, positive=True),
                    _number(b, "offset", path, 0.0, nonneg=True), path))
    return out


def _common_period(rates, s):
    if s.get("period") is not None:
        return _number(s, "period", "sampler", positive=True)
    fracs = [Fraction(r).limit_denominator(1 << 20) for r in rates]
    num = 0
    den = 1
    for f in fracs:
        den = den * f.denominator // math.gcd(den, f.denominator)
    for f in fracs:
        num = math.gcd(num, f.numerator * (den // f.denominator))
    return den / num


def sampler_rates(cfg):
    """Rates that the grid must resolve for the configured sampler."""
    s = _sampler_section(cfg)
    f_s = _number(cfg.data, "f_s", "", positive=True) if s.get("f_s") is None \
        else _number(s, "f_s", "sampler", positive=True)
    kind = s["kind"]
    if kind == "single_branch":
        return [f_s]
    if kind in ("filterbank", "interleaved"):
        specs = _branch_specs(s)
        period = _common_period([r for _, r, _, _ in specs], s)
        return [1.0 / period] + [r for _, r, _, _ in specs]
    if kind == "modulation":
        n = s.get("subbands", cfg.section("modulation").get("subbands", 2))
        return [f_s / n]
    return [1.0 / _number(s, "period", "sampler", positive=True)]


def build_sampler(cfg, grid):
    """Sampler object for the ``sampler`` section.

    Returns a :class:`PeriodicSampler`, a list of them (parallel branches of
    a filterbank), or the string ``"modulation"`` for designs that are
    derived from the channel by the caller.
    """
    s = _sampler_section(cfg)
    kind = s["kind"]
    f_s = _number(cfg.data, "f_s", "", positive=True) if s.get("f_s") is None \
        else _number(s, "f_s", "sampler", positive=True)
    if kind == "single_branch":
        offset = _number(s, "offset", "sampler", 0.0, nonneg=True)
        return from_single_branch(_filter(s.get("filter"), grid, f_s, "sampler.filter"),
                                  f_s, offset)
    if kind in ("filterbank", "interleaved"):
        specs = _branch_specs(s)
        period = _common_period([r for _, r, _, _ in specs], s)
        branches = []
        for filt, rate, offset, path in specs:
            count = rate * period
            if abs(count - round(count)) > 1e-9 * max(1.0, count):
                raise ConfigError(f"{path}.rate: {rate} Hz is not a whole number of "
                                  f"samples per period {period} s")
            M = int(round(count))
            offsets = offset + np.arange(M) / rate
            if offsets[-1] >= period:
                raise ConfigError(f"{path}.offset: phases exceed one period")
            resp = np.tile(np.asarray(_filter(filt, grid, rate, path + ".filter").values),
                           (M, 1))
            branches.append(PeriodicSampler(period, offsets, resp, grid, "filterbank"))
        return branches if kind == "filterbank" else interleave_multibranch(branches)
    if kind == "modulation":
        return "modulation"
    period = _number(s, "period", "sampler", positive=True)
    offsets = s.get("offsets")
    rows = s.get("responses")
    if not isinstance(offsets, list) or not isinstance(rows, list) or len(rows) != len(offsets):
        raise ConfigError("sampler.offsets and sampler.responses must be lists of equal length")
    matrix = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != grid.n_bins:
            raise ConfigError(f"sampler.responses[{i}]: expected {grid.n_bins} values "
                              "(custom responses are never re-gridded)")
        vals = []
        for v in row:
            if isinstance(v, list) and len(v) == 2:
                vals.append(complex(float(v[0]), float(v[1])))
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                vals.append(complex(v))
            else:
                raise ConfigError(f"sampler.responses[{i}]: bad value {v!r}")
        matrix.append(vals)
    return PeriodicSampler(period, [float(t) for t in offsets], np.array(matrix), grid,
                           "custom")


def _read_deviations(spec, path):
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: expected a mapping with 'path' and 'column'")
    _check_keys(spec, {"path", "column"}, path)
    try:
        with open(spec["path"], newline="") as fh:
            return [float(row[spec["column"]]) for row in csv.DictReader(fh)]
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: cannot read deviations ({exc})") from exc


def build_sampling_set(cfg):
    s = cfg.section("sampling_set")
    if not s:
        return SamplingSet.uniform(_number(cfg.data, "f_s", "", positive=True))
    if not isinstance(s, dict):
        raise ConfigError("sampling_set: expected a mapping")
    kind = s.get("kind")
    p = "sampling_set"
    if kind == "uniform":
        _check_keys(s, {"kind", "rate", "phase"}, p)
        return SamplingSet.uniform(_number(s, "rate", p, positive=True),
                                   _number(s, "phase", p, 0.0))
    if kind == "periodic":
        _check_keys(s, {"kind", "period", "offsets"}, p)
        offsets = s.get("offsets")
        if not isinstance(offsets, list):
            raise ConfigError(f"{p}.offsets: expected a list")
        return SamplingSet.periodic(_number(s, "period", p, positive=True), offsets)
    if kind == "jittered":
        _check_keys(s, {"kind", "rate", "bound", "seed", "deviations_csv"}, p)
        devs = None
        if s.get("deviations_csv") is not None:
            devs = _read_deviations(s["deviations_csv"], p + ".deviations_csv")
        seed = s.get("seed", cfg.data.get("seed", 0))
        return SamplingSet.jittered(_number(s, "rate", p, positive=True),
                                    _number(s, "bound", p, nonneg=True), int(seed), devs)
    if kind == "explicit":
        _check_keys(s, {"kind", "times"}, p)
        times = s.get("times")
        if not isinstance(times, list) or not times:
            raise ConfigError(f"{p}.times: expected a non-empty list")
        return SamplingSet.explicit(times)
    raise ConfigError(f"{p}.kind: expected uniform, periodic, jittered or explicit, "
                      f"got {kind!r}")
