import csv
import math
import re

import pytest
import yaml

from sampcap.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def field(out, name):
    for line in out.splitlines():
        parts = line.split()
        if len(parts) == 2 and parts[0] == name:
            return float(parts[1])
    raise AssertionError(f"{name} not in output")


def verdict(out, name):
    return re.search(rf"^{name}\s+(\S+)", out, re.M).group(1)


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else yaml.safe_dump(data))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


FLAT = {"grid": {"f_max": 1.0, "n_bins": 64},
        "channel": {"family": "flat", "gain": 3.0, "bandwidth": 1.0},
        "power": 2.0}


@pytest.mark.parametrize("f_s", [0.5, 1.0, 1.5])
def test_upper_bound_flat_closed_form(tmp_path, capsys, f_s):
    cfg = write(tmp_path, "flat.yaml", FLAT)
    code, out, _ = run(capsys, "upper-bound", "--config", cfg, "--fs", str(f_s))
    assert code == 0
    B = min(f_s, 1.0)
    assert field(out, "capacity_nats_per_s") == pytest.approx(
        B / 2 * math.log1p(2.0 * 3.0 / B), rel=1e-12)


def test_bits_flag_divides_by_ln2(tmp_path, capsys):
    cfg = write(tmp_path, "flat.yaml", FLAT)
    _, nats, _ = run(capsys, "upper-bound", "--config", cfg)
    _, bits, _ = run(capsys, "upper-bound", "--config", cfg, "--bits")
    assert field(bits, "capacity_bits_per_s") == pytest.approx(
        field(nats, "capacity_nats_per_s") / math.log(2), rel=1e-15)


def test_malformed_yaml_reports_line(tmp_path, capsys):
    cfg = write(tmp_path, "bad.yaml", "channel:\n  family: flat\n  gain: [1\n")
    code, _, err = run(capsys, "upper-bound", "--config", cfg)
    assert code == 2
    assert "line" in err


def test_bad_field_reports_path(tmp_path, capsys):
    cfg = write(tmp_path, "bad.yaml", {"channel": {"family": "flat", "gain": "lots"}})
    code, _, err = run(capsys, "upper-bound", "--config", cfg)
    assert code == 2 and "channel.gain" in err
    cfg = write(tmp_path, "typo.yaml", {"channel": {"family": "flat", "gian": 1}})
    code, _, err = run(capsys, "upper-bound", "--config", cfg)
    assert code == 2 and "gian" in err
    code, _, err = run(capsys, "upper-bound", "--config", str(tmp_path / "missing.yaml"))
    assert code == 2


def test_flags_override_config_and_set_overrides_flags(tmp_path, capsys):
    cfg = write(tmp_path, "flat.yaml", FLAT)
    _, out, _ = run(capsys, "upper-bound", "--config", cfg, "--power", "1.0",
                    "--set", "channel.gain=1.0")
    assert field(out, "capacity_nats_per_s") == pytest.approx(0.5 * math.log(2), rel=1e-12)
    _, out, _ = run(capsys, "upper-bound", "--config", cfg, "--fs", "0.5",
                    "--set", "f_s=1.0")
    assert field(out, "f_s_hz") == 1.0


def test_periodic_lpf_matches_closed_form(tmp_path, capsys):
    cfg = write(tmp_path, "p.yaml", {**FLAT, "channel": {"family": "flat", "gain": 3.0},
                                     "f_s": 1.0})
    code, out, _ = run(capsys, "periodic", "--config", cfg)
    assert code == 0
    assert field(out, "capacity_nats_per_s") == pytest.approx(0.5 * math.log1p(6.0), rel=1e-12)


def test_periodic_allpass_full_rate_equals_bound(tmp_path, capsys):
    cfg = write(tmp_path, "p.yaml", {"channel": {"family": "triangle", "peak": 4.0},
                                     "f_s": 2.0, "sampler": {"kind": "single_branch",
                                                             "filter": "allpass"}})
    code, out, _ = run(capsys, "periodic", "--config", cfg)
    assert code == 0
    assert field(out, "capacity_nats_per_s") == pytest.approx(
        field(out, "upper_bound_nats_per_s"), rel=1e-8)


def test_periodic_allpass_two_band_gap(tmp_path, capsys):
    cfg = write(tmp_path, "p.yaml", {
        "channel": {"family": "two_band", "inner_gain": 1.0, "outer_gain": 10.0, "split": 0.5},
        "f_s": 1.0, "sampler": {"kind": "single_branch", "filter": "allpass"}})
    code, out, _ = run(capsys, "periodic", "--config", cfg)
    assert code == 0
    assert field(out, "capacity_nats_per_s") < field(out, "upper_bound_nats_per_s") - 1e-3


def test_periodic_rank_deficient_exit_4(tmp_path, capsys):
    cfg = write(tmp_path, "r.yaml", {"sampler": {"kind": "single_branch",
                                                 "filter": {"type": "lowpass", "width": 0.5}}})
    code, _, err = run(capsys, "periodic", "--config", cfg)
    assert code == 4
    assert "base frequency" in err


def test_regrid_is_reported(capsys):
    code, out, _ = run(capsys, "periodic", "--fs", "0.3")
    assert code == 0
    assert "n_bins changed from 64 to 60" in out
    assert "n_bins: 60" in out


def test_custom_matrix_not_regridded(tmp_path, capsys):
    cfg = write(tmp_path, "c.yaml", {"grid": {"f_max": 1.0, "n_bins": 8},
                                     "sampler": {"kind": "custom_matrix", "period": 1.0,
                                                 "offsets": [0.0], "responses": [[1.0] * 6]}})
    code, _, err = run(capsys, "periodic", "--config", cfg)
    assert code == 2 and "responses[0]" in err


def test_filterbank_and_modulation_reach_bound(tmp_path, capsys):
    cfg = write(tmp_path, "m.yaml", {
        "channel": {"family": "piecewise", "segments": [
            {"band": [-1.0, -0.5], "h_sq": 4.0}, {"band": [0.5, 1.0], "h_sq": 2.0}]},
        "f_s": 1.0, "modulation": {"subbands": 2}})
    code, out, _ = run(capsys, "filterbank", "--config", cfg)
    assert code == 0
    assert field(out, "capacity_nats_per_s") == field(out, "upper_bound_nats_per_s")
    code, out, _ = run(capsys, "modulation", "--config", cfg)
    assert code == 0
    assert field(out, "capacity_nats_per_s") == pytest.approx(
        field(out, "upper_bound_nats_per_s"), abs=1e-6)


SWEEP = {"channel": {"family": "two_band", "inner_gain": 1.0, "outer_gain": 10.0,
                     "split": 0.5},
         "sweep": {"range": {"start": 0.125, "stop": 2.0, "count": 16}, "sampler": "allpass"}}


def test_sweep_two_band_dip(tmp_path, capsys):
    cfg = write(tmp_path, "s.yaml", SWEEP)
    out_csv = str(tmp_path / "s.csv")
    code, out, _ = run(capsys, "sweep", "--config", cfg, "--out", out_csv)
    assert code == 0
    rows = read_csv(out_csv)
    assert rows[0] == ["f_s_hz", "upper_bound_nats_per_s", "allpass_sampler_nats_per_s"]
    upper = [float(r[1]) for r in rows[1:]]
    fixed = [float(r[2]) for r in rows[1:]]
    assert len(rows) == 17
    assert all(b >= a for a, b in zip(upper, upper[1:]))
    assert any(b < a for a, b in zip(fixed, fixed[1:]))
    assert verdict(out, "upper_bound_nondecreasing") == "True"
    assert verdict(out, "allpass_sampler_nondecreasing") == "False"
    assert "[0.625, 0.75]" in out


def test_sweep_single_point_and_descending(tmp_path, capsys):
    one = write(tmp_path, "one.yaml", {"sweep": {"rates": [0.5]}})
    out_csv = str(tmp_path / "one.csv")
    assert run(capsys, "sweep", "--config", one, "--out", out_csv)[0] == 0
    assert len(read_csv(out_csv)) == 2
    desc = write(tmp_path, "desc.yaml", {"sweep": {"rates": [1.5, 1.0, 0.5]}})
    out_csv = str(tmp_path / "desc.csv")
    code, out, _ = run(capsys, "sweep", "--config", desc, "--out", out_csv)
    assert [r[0] for r in read_csv(out_csv)[1:]] == ["1.5", "1.0", "0.5"]
    assert verdict(out, "upper_bound_nondecreasing") == "True"


def test_sweep_requires_rates(tmp_path, capsys):
    cfg = write(tmp_path, "e.yaml", {"sweep": {"rates": []}})
    assert run(capsys, "sweep", "--config", cfg)[0] == 2


def test_csv_is_byte_identical(tmp_path, capsys):
    cfg = write(tmp_path, "s.yaml", SWEEP)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "sweep", "--config", cfg, "--out", str(a))
    run(capsys, "sweep", "--config", cfg, "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv.config.yaml").read_bytes() == \
        (tmp_path / "b.csv.config.yaml").read_bytes()


def test_verify_default_fixture_passes(tmp_path, capsys):
    out_csv = str(tmp_path / "v.csv")
    code, out, _ = run(capsys, "verify", "--out", out_csv)
    assert code == 0
    rows = read_csv(out_csv)
    assert rows[0] == ["check", "measured", "tolerance", "passed", "note"]
    assert all(r[3] == "true" for r in rows[1:])
    names = {r[0] for r in rows[1:]}
    assert {"right_invertibility_sigma_ratio", "converse_chain_max_violation",
            "alias_sum_identity_deviation", "convergence_final_relative_error",
            "kadec_relative_change", "truncation_trace_shift"} <= names


def test_verify_triangle_convergence_within_one_percent(tmp_path, capsys):
    cfg = write(tmp_path, "t.yaml", {"channel": {"family": "triangle", "peak": 4.0}})
    out_csv = str(tmp_path / "v.csv")
    code, _, _ = run(capsys, "verify", "--config", cfg, "--out", out_csv)
    assert code == 0
    rows = {r[0]: r for r in read_csv(out_csv)[1:]}
    assert float(rows["convergence_final_relative_error"][1]) <= 0.01


def test_verify_rank_deficient_exit_4(tmp_path, capsys):
    cfg = write(tmp_path, "r.yaml", {"sampler": {"kind": "single_branch",
                                                 "filter": {"type": "lowpass", "width": 0.5}}})
    code, out, err = run(capsys, "verify", "--config", cfg)
    assert code == 4
    assert "FAIL" in out and "right-invertibility" in err


def test_verify_failing_tolerance_exit_3(tmp_path, capsys):
    cfg = write(tmp_path, "t.yaml", {"channel": {"family": "triangle", "peak": 4.0}})
    code, _, err = run(capsys, "verify", "--config", cfg, "--tol", "1e-9")
    assert code == 3 and "convergence_final_relative_error" in err


def test_beurling_records_seed(tmp_path, capsys):
    cfg = write(tmp_path, "j.yaml", {"sampling_set": {"kind": "jittered", "rate": 1.0,
                                                      "bound": 0.3, "seed": 7}})
    code, out, _ = run(capsys, "beurling", "--config", cfg, "--seed", "11")
    assert code == 0
    assert field(out, "seed") == 11
    assert field(out, "limit_density_hz") == 1.0


def test_beurling_deviations_from_csv(tmp_path, capsys):
    devs = tmp_path / "dev.csv"
    devs.write_text("n,delta\n0,0.1\n1,-0.1\n")
    cfg = write(tmp_path, "j.yaml", {"sampling_set": {
        "kind": "jittered", "rate": 1.0, "bound": 0.2,
        "deviations_csv": {"path": str(devs), "column": "delta"}}})
    assert run(capsys, "beurling", "--config", cfg)[0] == 0
    cfg = write(tmp_path, "k.yaml", {"sampling_set": {
        "kind": "jittered", "rate": 1.0, "bound": 0.2,
        "deviations_csv": {"path": str(devs), "column": "nope"}}})
    assert run(capsys, "beurling", "--config", cfg)[0] == 2


def test_filterbank_branch_sampler(tmp_path, capsys):
    base = {"channel": {"family": "triangle", "peak": 4.0},
            "sampler": {"kind": "filterbank", "branches": [
                {"filter": {"type": "bandpass", "band": [-0.25, 0.25]}, "rate": 0.5},
                {"filter": {"type": "bandpass", "band": [0.25, 0.5]}, "rate": 0.25}]}}
    _, native, _ = run(capsys, "periodic", "--config", write(tmp_path, "n.yaml", base))
    base["sampler"]["kind"] = "interleaved"
    _, merged, _ = run(capsys, "periodic", "--config", write(tmp_path, "i.yaml", base))
    assert field(native, "capacity_nats_per_s") == pytest.approx(
        field(merged, "capacity_nats_per_s"), abs=1e-9)
