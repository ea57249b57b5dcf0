"""Command-line front end.

Usage::

    sampcap COMMAND [--config PATH] [--fs HZ] [--power P] [--set KEY=VALUE ...]
                    [--bits] [--out PATH] [--seed N] [--tol X]

Exit codes: 0 success, 2 configuration error, 3 numerical error or failed
verification check, 4 right-invertibility failure.
"""

import argparse
import csv
import io
import math
import sys
import warnings

import numpy as np
import yaml

from . import horizon
from .capacity import capacity_sweep, upper_bound
from .config import (apply_override, build_channel, build_sampler,
                     build_sampling_set, grid_from, load_config, resolve_grid,
                     sampler_rates)
from .errors import (ConfigError, GridAlignmentError, PreconditionError,
                     RightInvertibilityError, SampcapError)
from .periodic import (allpass_filter, build_alias_matrices, corollary_bound,
                       correlation_fourier_series, design_filterbank,
                       design_modulation, from_single_branch, ideal_filter,
                       periodic_capacity, right_invertibility_check)
from .spectral import SpectralSet

__all__ = ["main", "Report"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVERTIBILITY = 0, 2, 3, 4


class Report:
    """Scalar results, tables and verification checks of one command."""

    def __init__(self, command, cfg, bits):
        self.command = command
        self.cfg = cfg
        self.bits = bits
        self.fields = []
        self.tables = []
        self.checks = []

    @property
    def unit(self):
        return "bits_per_s" if self.bits else "nats_per_s"

    def cap(self, value):
        return value / math.log(2) if self.bits else value

    def add(self, name, value):
        self.fields.append((name, value))

    def table(self, name, header, rows):
        self.tables.append((name, list(header), [list(r) for r in rows]))

    def check(self, name, measured, tolerance, passed, note=""):
        self.checks.append((name, measured, tolerance, bool(passed), note))

    @property
    def failed(self):
        return [c for c in self.checks if not c[3]]

    def csv_rows(self):
        """Header and rows for the machine-readable output."""
        if self.checks:
            return (["check", "measured", "tolerance", "passed", "note"],
                    [[n, m, t, "true" if p else "false", note]
                     for n, m, t, p, note in self.checks])
        if self.tables:
            _, header, rows = self.tables[0]
            return header, rows
        return ["quantity", "value"], [[n, v] for n, v in self.fields]

    def render(self):
        out = io.StringIO()
        out.write(f"sampcap {self.command}\n\nresolved config:\n")
        echo = yaml.safe_dump(self.cfg.echo(), sort_keys=True, default_flow_style=None)
        out.write("".join("  " + line + "\n" for line in echo.splitlines()))
        if self.fields:
            out.write("\n")
            width = max(len(n) for n, _ in self.fields)
            for name, value in self.fields:
                out.write(f"{name:<{width}}  {_fmt(value)}\n")
        for name, header, rows in self.tables:
            out.write(f"\n{name}:\n")
            _write_table(out, header, rows)
        if self.checks:
            out.write("\nchecks:\n")
            _write_table(out, ["check", "measured", "tolerance", "result", "note"],
                         [[n, m, t, "PASS" if p else "FAIL", note]
                          for n, m, t, p, note in self.checks])
        return out.getvalue()


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def _write_table(out, header, rows):
    cells = [header] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    for r in cells:
        out.write("  " + "  ".join(c.rjust(w) for c, w in zip(r, widths)) + "\n")


def write_csv(path, report):
    header, rows = report.csv_rows()
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(c) for c in row])
    with open(path + ".config.yaml", "w", encoding="ascii") as fh:
        yaml.safe_dump(report.cfg.echo(), fh, sort_keys=True)


def _intervals(spectral_set):
    return [[float(a), float(b)] for a, b in spectral_set.intervals]


def _power(cfg):
    p = cfg.data.get("power")
    if isinstance(p, bool) or not isinstance(p, (int, float)) or p < 0:
        raise ConfigError(f"power: expected a nonnegative number, got {p!r}")
    return float(p)


def _fs(cfg):
    f = cfg.data.get("f_s")
    if isinstance(f, bool) or not isinstance(f, (int, float)) or f <= 0:
        raise ConfigError(f"f_s: expected a positive number, got {f!r}")
    return float(f)


def _eps(cfg):
    e = cfg.data.get("eps_min")
    if isinstance(e, bool) or not isinstance(e, (int, float)) or not 0 < e < 1:
        raise ConfigError(f"eps_min: expected a number in (0, 1), got {e!r}")
    return float(e)


def _sampler_for(cfg, channel, power):
    obj = build_sampler(cfg, channel.grid)
    if isinstance(obj, str):
        s = cfg.section("sampler")
        n = s.get("subbands", cfg.section("modulation").get("subbands", 2))
        design, _ = design_modulation(channel, s.get("f_s", _fs(cfg)), n, power)
        return design.to_sampler(channel.grid)
    return obj


def _total_rate(sampler):
    branches = [sampler] if hasattr(sampler, "offsets") else sampler
    return math.fsum(b.rate for b in branches)


def _period(sampler):
    return (sampler if hasattr(sampler, "offsets") else sampler[0]).period


def cmd_upper_bound(cfg, report):
    grid = grid_from(cfg)
    channel = build_channel(cfg, grid)
    f_s, power = _fs(cfg), _power(cfg)
    result = upper_bound(channel, f_s, power)
    sol = result.solution
    report.add("f_s_hz", f_s)
    report.add("power", power)
    report.add("b_m_intervals_hz", _intervals(result.b_m))
    report.add("b_m_measure_hz", result.b_m.measure)
    report.add("water_level", sol.nu)
    report.add(f"capacity_{report.unit}", report.cap(result.capacity))
    rows = [[int(i), float(grid.centers[i]), float(w), float(g), float(p)]
            for i, w, g, p in zip(sol.ids, sol.weights, sol.gains, sol.power) if p > 0]
    report.table("allocation", ["bin", "frequency_hz", "width_hz", "snr",
                                "power_density"], rows)


def cmd_periodic(cfg, report):
    power = _power(cfg)
    grid = resolve_grid(cfg, sampler_rates(cfg))
    channel = build_channel(cfg, grid)
    sampler = _sampler_for(cfg, channel, power)
    matrices = build_alias_matrices(sampler, channel)
    check = right_invertibility_check(matrices, _eps(cfg))
    if not check.passed:
        raise RightInvertibilityError(
            f"sampler is not right-invertible: sigma_min = {check.sigma_min:.3g} below "
            f"{check.threshold:.3g} at base frequency {check.worst_frequency!r} Hz",
            frequency=check.worst_frequency, sigma_min=check.sigma_min,
            sigma_max=check.sigma_max)
    solution, profile = periodic_capacity(sampler, channel, power, _eps(cfg))
    rate = _total_rate(sampler)
    eigs = profile.eigenvalues
    report.add("sampling_rate_hz", rate)
    report.add("period_s", _period(sampler))
    report.add("phases", int(eigs.shape[1]))
    report.add("sigma_min", float(np.min(profile.sigma_min)))
    report.add("sigma_max", float(np.max(profile.sigma_max)))
    report.add("worst_base_frequency_hz", check.worst_frequency)
    report.add("eigenvalue_min", float(np.min(eigs)))
    report.add("eigenvalue_max", float(np.max(eigs)))
    report.add("water_level", solution.nu)
    report.add(f"capacity_{report.unit}", report.cap(solution.capacity))
    report.add(f"upper_bound_{report.unit}",
               report.cap(upper_bound(channel, rate, power).capacity))
    rows = [[float(f)] + [float(v) for v in row]
            for f, row in zip(profile.base_freqs, eigs)]
    report.table("eigenvalues", ["base_frequency_hz"] +
                 [f"lambda_{i}" for i in range(eigs.shape[1])], rows)


def cmd_filterbank(cfg, report):
    grid = grid_from(cfg)
    channel = build_channel(cfg, grid)
    f_s, power = _fs(cfg), _power(cfg)
    design, solution = design_filterbank(channel, f_s, power)
    bound = upper_bound(channel, f_s, power).capacity
    report.add("f_s_hz", f_s)
    report.add("total_branch_rate_hz", design.total_rate)
    report.add("water_level", solution.nu)
    report.add(f"capacity_{report.unit}", report.cap(solution.capacity))
    report.add(f"upper_bound_{report.unit}", report.cap(bound))
    report.table("branches", ["low_hz", "high_hz", "rate_hz"],
                 [[a, b, br.rate] for br in design.branches
                  for a, b in br.band.intervals])


def cmd_modulation(cfg, report):
    f_s, power = _fs(cfg), _power(cfg)
    n = cfg.section("modulation").get("subbands", 2)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"modulation.subbands: expected a positive integer, got {n!r}")
    grid = resolve_grid(cfg, [f_s / n])
    channel = build_channel(cfg, grid)
    design, solution = design_modulation(channel, f_s, n, power)
    report.add("f_s_hz", f_s)
    report.add("subbands", n)
    report.add("subband_width_hz", design.subband_width)
    report.add("pre_filter_hz", _intervals(design.pre_filter))
    report.add("post_filter_hz", _intervals(design.post_filter))
    report.add("water_level", solution.nu)
    report.add(f"capacity_{report.unit}", report.cap(solution.capacity))
    report.add(f"upper_bound_{report.unit}",
               report.cap(upper_bound(channel, f_s, power).capacity))
    width = design.subband_width
    report.table("assignment", ["subband_low_hz", "slot_low_hz", "shift",
                                "coefficient_re", "coefficient_im"],
                 [[k * width, s * width, s - k,
                   design.coefficients[s - k].real, design.coefficients[s - k].imag]
                  for k, s in design.assignment])


def _sweep_rates(cfg):
    sw = cfg.section("sweep")
    if not isinstance(sw, dict):
        raise ConfigError("sweep: expected a mapping")
    extra = set(sw) - {"rates", "range", "sampler"}
    if extra:
        raise ConfigError(f"sweep: unknown field(s) {sorted(extra)}")
    if sw.get("rates") is not None:
        rates = sw["rates"]
        if not isinstance(rates, list) or not rates:
            raise ConfigError("sweep.rates: expected a non-empty list")
    elif sw.get("range") is not None:
        r = sw["range"]
        try:
            rates = list(np.linspace(float(r["start"]), float(r["stop"]), int(r["count"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("sweep.range: expected start, stop and count") from exc
        if not rates:
            raise ConfigError("sweep.range.count: must be at least 1")
    else:
        raise ConfigError("sweep: give either 'rates' or 'range'")
    for i, f in enumerate(rates):
        if isinstance(f, bool) or not isinstance(f, (int, float, np.floating)) or f <= 0:
            raise ConfigError(f"sweep.rates[{i}]: expected a positive number, got {f!r}")
    return [float(f) for f in rates], sw.get("sampler")


def _monotone(values):
    return all(b >= a for a, b in zip(values, values[1:]))


def cmd_sweep(cfg, report):
    power = _power(cfg)
    rates, fixed = _sweep_rates(cfg)
    if fixed not in (None, "none", "allpass", "lowpass"):
        raise ConfigError(f"sweep.sampler: expected allpass, lowpass or none, got {fixed!r}")
    fixed = None if fixed == "none" else fixed
    grid = resolve_grid(cfg, rates) if fixed else grid_from(cfg)
    channel = build_channel(cfg, grid)
    rows = capacity_sweep(channel, rates, power)
    header = ["f_s_hz", f"upper_bound_{report.unit}"]
    table = [[r.f_s, report.cap(r.capacity)] for r in rows]
    order = np.argsort(rates, kind="stable")
    upper_sorted = [rows[i].capacity for i in order]
    report.add("upper_bound_nondecreasing", _monotone(upper_sorted))
    if fixed:
        header.append(f"{fixed}_sampler_{report.unit}")
        values = []
        for f_s in rates:
            filt = allpass_filter(grid) if fixed == "allpass" else \
                ideal_filter(grid, SpectralSet.interval(-f_s / 2, f_s / 2))
            sol, _ = periodic_capacity(from_single_branch(filt, f_s), channel, power,
                                       _eps(cfg))
            values.append(sol.capacity)
        for row, v in zip(table, values):
            row.append(report.cap(v))
        sorted_vals = [values[i] for i in order]
        report.add(f"{fixed}_sampler_nondecreasing", _monotone(sorted_vals))
        drops = [(rates[order[i]], rates[order[i + 1]]) for i in range(len(order) - 1)
                 if sorted_vals[i + 1] < sorted_vals[i]]
        report.add(f"{fixed}_sampler_decreases_hz", [list(d) for d in drops])
    report.table("sweep", header, table)


def cmd_beurling(cfg, report):
    b = cfg.section("beurling")
    if not isinstance(b, dict):
        raise ConfigError("beurling: expected a mapping")
    extra = set(b) - {"window", "positions", "span"}
    if extra:
        raise ConfigError(f"beurling: unknown field(s) {sorted(extra)}")
    window = b.get("window", 10.0)
    positions = b.get("positions", 256)
    if isinstance(window, bool) or not isinstance(window, (int, float)) or window <= 0:
        raise ConfigError(f"beurling.window: expected a positive number, got {window!r}")
    if isinstance(positions, bool) or not isinstance(positions, int) or positions < 1:
        raise ConfigError(f"beurling.positions: expected a positive integer, got {positions!r}")
    sset = build_sampling_set(cfg)
    est = horizon.beurling_density(sset, float(window), positions, b.get("span"))
    report.add("kind", sset.kind)
    if sset.kind == "jittered":
        report.add("seed", sset.seed)
    report.add("window_s", float(window))
    report.add("d_plus_hz", est.d_plus)
    report.add("d_minus_hz", est.d_minus)
    report.add("limit_density_hz", est.exact if est.asymptotic else "unknown")


def _vsetting(v, key, default, kind=float):
    value = v.get(key, default)
    if kind is list:
        if not isinstance(value, list) or not value:
            raise ConfigError(f"verify.{key}: expected a non-empty list")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
        raise ConfigError(f"verify.{key}: expected a positive number, got {value!r}")
    return kind(value)


_VERIFY_KEYS = {"horizons", "tolerance", "noise_floor", "jitter", "kadec_samples",
                "truncation", "chain_tolerance", "identity_tolerance", "seed"}


def cmd_verify(cfg, report):
    v = cfg.section("verify")
    if not isinstance(v, dict):
        raise ConfigError("verify: expected a mapping")
    extra = set(v) - _VERIFY_KEYS
    if extra:
        raise ConfigError(f"verify: unknown field(s) {sorted(extra)}")
    horizons = _vsetting(v, "horizons", [8, 16, 32, 64], list)
    tol = _vsetting(v, "tolerance", 0.01)
    floor = _vsetting(v, "noise_floor", 1e-3)
    jitter_frac = _vsetting(v, "jitter", 0.2)
    kadec_samples = _vsetting(v, "kadec_samples", 128, int)
    trunc = _vsetting(v, "truncation", 4.0)
    chain_tol = _vsetting(v, "chain_tolerance", 1e-6)
    ident_tol = _vsetting(v, "identity_tolerance", 1e-10)
    seed = int(v.get("seed", cfg.data.get("seed", 0)))

    power, eps = _power(cfg), _eps(cfg)
    grid = resolve_grid(cfg, sampler_rates(cfg))
    channel = build_channel(cfg, grid)
    sampler = _sampler_for(cfg, channel, power)
    rate = _total_rate(sampler)

    matrices = build_alias_matrices(sampler, channel)
    ri = right_invertibility_check(matrices, eps)
    report.check("right_invertibility_sigma_ratio",
                 ri.sigma_min / ri.sigma_max if ri.sigma_max > 0 else 0.0, eps, ri.passed,
                 f"worst base frequency {ri.worst_frequency!r} Hz")
    if not ri.passed:
        raise RightInvertibilityError(
            f"sampler is not right-invertible at base frequency {ri.worst_frequency!r} Hz",
            frequency=ri.worst_frequency, sigma_min=ri.sigma_min, sigma_max=ri.sigma_max)

    sol, profile = periodic_capacity(sampler, channel, power, eps)
    c_p = sol.capacity
    c_alias = corollary_bound(channel, matrices.layout.f_q, rate, power).capacity
    c_u = upper_bound(channel, rate, power).capacity
    report.add(f"periodic_capacity_{report.unit}", report.cap(c_p))
    report.add(f"best_alias_bound_{report.unit}", report.cap(c_alias))
    report.add(f"upper_bound_{report.unit}", report.cap(c_u))
    gap = max(c_p - c_alias, c_alias - c_u)
    report.check("converse_chain_max_violation", gap, chain_tol, gap <= chain_tol,
                 "periodic <= best-alias bound <= upper bound")

    fh_direct, fq_direct = correlation_fourier_series(sampler, channel)
    scale = max(1.0, float(np.max(np.abs(matrices.fhq()))))
    dev = max(float(np.max(np.abs(matrices.fhq() - fh_direct))),
              float(np.max(np.abs(matrices.fqq() - fq_direct)))) / scale
    report.check("alias_sum_identity_deviation", dev, ident_tol, dev <= ident_tol,
                 "alias matrices vs correlation Fourier series")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        kernel = horizon.sampler_kernel(sampler, channel)
        sset = horizon.sampler_sampling_set(sampler)
        rows, prev = [], None
        errors = []
        for h in horizons:
            T = float(h) / rate
            times, phases = sset.materialize(T), sset.phases(T)
            fin = horizon.finite_capacity(kernel, times, T, power, phases, eps)
            err = abs(fin.capacity - c_p) / c_p if c_p > 0 else abs(fin.capacity)
            errors.append(err)
            rows.append([float(h), T, int(times.size), report.cap(fin.capacity), err,
                         fin.trace_rate, fin.channel_energy])
            report.check(f"trace_bound_T={T!r}", fin.trace_rate, fin.channel_energy,
                         fin.trace_rate <= fin.channel_energy * (1 + 1e-9),
                         "trace rate <= channel kernel energy")
            if prev is None:
                prev = times, T, phases
    report.table("convergence", ["horizon_periods", "T_s", "samples",
                                 f"finite_capacity_{report.unit}", "relative_error",
                                 "trace_rate", "kernel_energy"], rows)
    report.check("convergence_final_relative_error", errors[-1], tol, errors[-1] <= tol)
    worst_rise = max([b - a for a, b in zip(errors, errors[1:])], default=0.0)
    report.check("convergence_error_nonincreasing", worst_rise, floor, worst_rise <= floor,
                 "largest rise of relative error along the schedule")
    for w in caught:
        report.add("warning", str(w.message))

    times, T, phases = prev
    trunc_kernel = kernel.truncated(trunc / rate)
    tr = horizon.truncation_comparison(kernel, trunc_kernel, times, T, phases, eps)
    report.check("truncation_trace_shift", tr.trace_shift, tr.trace_bound, tr.within_bound,
                 f"kernel truncated to {trunc!r} periods; max eigenvalue deviation "
                 f"{tr.max_deviation!r}")

    single = kernel.responses.shape[0] == 1
    if single:
        T_k = kadec_samples / (2.0 * rate)
        try:
            kd = horizon.kadec_perturbation_test(kernel, rate, jitter_frac / rate, T_k,
                                                 power, seed)
        except PreconditionError as exc:
            report.check("kadec_relative_change", float("nan"), tol, True,
                         f"skipped: {exc}")
        else:
            report.check("kadec_relative_change", kd.relative, tol, kd.relative <= tol,
                         f"jitter {jitter_frac!r}/f_s on {kd.samples} samples, seed {seed}")
            try:
                horizon.kadec_perturbation_test(kernel, rate, 0.25 / rate, T_k, power, seed)
                rejected = False
            except PreconditionError:
                rejected = True
            report.check("kadec_quarter_period_rejected", 0.25, 0.25, rejected,
                         "jitter of 1/(4 f_s) must be refused")
    else:
        report.check("kadec_relative_change", float("nan"), tol, True,
                     "skipped: needs a single-filter uniform sampler")


COMMANDS = {
    "upper-bound": cmd_upper_bound,
    "periodic": cmd_periodic,
    "filterbank": cmd_filterbank,
    "modulation": cmd_modulation,
    "sweep": cmd_sweep,
    "beurling": cmd_beurling,
    "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sampcap",
        description="Capacity of sampled Gaussian channels.",
        epilog="Precedence: defaults < --config file < --fs/--power/--seed/--tol "
               "< --set overrides.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", metavar="PATH", help="YAML run configuration")
    parser.add_argument("--fs", type=float, metavar="HZ", help="sampling rate")
    parser.add_argument("--power", type=float, metavar="P", help="transmit power")
    parser.add_argument("--seed", type=int, metavar="N", help="random seed")
    parser.add_argument("--tol", type=float, metavar="X",
                        help="relative tolerance for verification checks")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config field, e.g. channel.gain=2")
    parser.add_argument("--bits", action="store_true", help="report bits/s instead of nats/s")
    parser.add_argument("--out", metavar="PATH", help="write CSV results to PATH")
    return parser


def resolve(args):
    cfg = load_config(args.config)
    if args.fs is not None:
        cfg.data["f_s"] = args.fs
    if args.power is not None:
        cfg.data["power"] = args.power
    if args.seed is not None:
        cfg.data["seed"] = args.seed
        if isinstance(cfg.data.get("sampling_set"), dict):
            cfg.data["sampling_set"]["seed"] = args.seed
    if args.tol is not None:
        if not args.tol > 0:
            raise ConfigError("--tol must be positive")
        cfg.data.setdefault("verify", {})
        if cfg.data["verify"] is None:
            cfg.data["verify"] = {}
        cfg.data["verify"]["tolerance"] = args.tol
    for item in args.set:
        apply_override(cfg, item)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    report = None
    try:
        cfg = resolve(args)
        report = Report(args.command, cfg, args.bits)
        COMMANDS[args.command](cfg, report)
    except (ConfigError, GridAlignmentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if getattr(exc, "suggestion", None) is not None:
            print(f"suggestion: {exc.suggestion!r}", file=sys.stderr)
        return EXIT_CONFIG
    except RightInvertibilityError as exc:
        if report is not None and report.checks:
            sys.stdout.write(report.render())
        print(f"right-invertibility failure: {exc}", file=sys.stderr)
        return EXIT_INVERTIBILITY
    except (SampcapError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    sys.stdout.write(report.render())
    if args.out:
        write_csv(args.out, report)
    if report.failed:
        names = ", ".join(c[0] for c in report.failed)
        print(f"verification failed: {names}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
