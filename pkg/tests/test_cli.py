import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qubitstep.cli import main, parse_angle, parse_list, parse_range
from qubitstep.table import OutputTable

FAST = ["--reps", "1", "--theta", "20:60:3", "--n-per-batch", "2000"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "text,want",
    [
        ("20", np.deg2rad(20)),
        ("2.5deg", np.deg2rad(2.5)),
        ("0.3rad", 0.3),
        ("pi/9", np.pi / 9),
        ("2pi/9", 2 * np.pi / 9),
        ("-pi/4", -np.pi / 4),
        ("pi", np.pi),
    ],
)
def test_parse_angle(text, want):
    assert parse_angle(text) == pytest.approx(want, rel=1e-15)


def test_parse_range_and_list():
    np.testing.assert_allclose(parse_range("10:80:15"), np.deg2rad(np.linspace(10, 80, 15)))
    assert parse_list("2.5,5, 10") == pytest.approx(np.deg2rad([2.5, 5, 10]))
    for bad in ("10:80", "a:b:3", "10:80:0"):
        with pytest.raises(ValueError):
            parse_range(bad)
    with pytest.raises(ValueError):
        parse_angle("twenty")


def test_surface_grid(capsys):
    code, out, _ = run(["surface", "--theta", "10:80:3", "--gamma", "5:35:4", "--restarts", "2"], capsys)
    assert code == 0
    t = OutputTable.parse(out)
    assert len(t.rows) == 12
    assert set(t.column("status")) == {"ok"}
    assert t.column("theta")[0] == 10.0 and t.column("gamma")[-1] == 35.0
    # small gamma near theta ~ 80 deg: stepwise beats the joint bound
    assert min(t.column("r_opt_gamma_first")) < 1


def test_surface_masks_singular_rows(capsys):
    code, out, _ = run(["surface", "--theta", "90:90:1", "--gamma", "10:10:1", "--strict"], capsys)
    assert code == 3
    t = OutputTable.parse(out)
    row = t.records()[0]
    assert row["status"] == "SingularInformation"
    assert math.isinf(row["c_holevo"]) and math.isnan(row["r_opt_theta_first"])


def test_stepwise_reruns_are_identical(tmp_path, capsys):
    argv = ["stepwise", "--seed", "7", "--vt-method", "off"] + FAST
    a = run(argv, capsys)[1]
    b = run(argv, capsys)[1]
    assert a == b and len(OutputTable.parse(a).rows) == 3
    c = run(["stepwise", "--seed", "8", "--vt-method", "off"] + FAST, capsys)[1]
    assert c != a


def test_order_flag(capsys):
    base = ["stepwise", "--vt-method", "off"] + FAST
    a = OutputTable.parse(run(base, capsys)[1])
    b = OutputTable.parse(run(base + ["--order", "theta-first"], capsys)[1])
    assert a.column("theta_true_deg") == b.column("theta_true_deg")
    assert a.column("sigma_total") != b.column("sigma_total")


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# campaign\nseed = 7\nreps = 1\ntheta = 20:60:3\nn-per-batch = 2000\nvt-method = off\n")
    from_file = run(["stepwise", "--config", str(cfg)], capsys)[1]
    direct = run(["stepwise", "--seed", "7", "--vt-method", "off"] + FAST, capsys)[1]
    assert from_file == direct
    overridden = run(["stepwise", "--config", str(cfg), "--seed", "8"], capsys)[1]
    assert overridden != from_file
    assert set(OutputTable.parse(overridden).column("seed")) == {8}


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("sede = 3\n")
    code, _, err = run(["stepwise", "--config", str(cfg)], capsys)
    assert code == 2 and "sede" in err


def test_validation_lists_every_bad_flag(capsys):
    code, out, err = run(["stepwise", "--reps", "0", "--beta", "1.5", "--n-per-batch", "0"], capsys)
    assert code == 2 and out == ""
    for flag in ("--reps", "--beta", "--n-per-batch"):
        assert flag in err


def test_bad_values_name_the_flag(capsys):
    code, _, err = run(["stepwise", "--tau", "abc"], capsys)
    assert code == 2 and "--tau" in err
    code, _, err = run(["surface", "--bogus"], capsys)
    assert code == 2


def test_compare_rows(tmp_path, capsys):
    out = tmp_path / "c.jsonl"
    argv = ["compare", "--tau", "5,10", "--format", "jsonl", "--out", str(out)] + FAST
    assert run(argv, capsys)[0] == 0
    t = OutputTable.parse(out.read_text(), "jsonl")
    keys = {(r["tau_deg"], r["ordering"]) for r in t.records()}
    assert keys == {(5.0, "gamma-first"), (5.0, "theta-first"), (10.0, "gamma-first"), (10.0, "theta-first")}
    assert len(t.rows) == 12
    for r in t.records():
        assert r["ratio"] == pytest.approx(r["sigma_total_mean"] / r["vt_quantum_je_trace"], rel=1e-8)


def test_compare_workers_do_not_change_bytes(capsys):
    argv = ["compare", "--tau", "5"] + FAST
    assert run(argv, capsys)[1] == run(argv + ["--workers", "3"], capsys)[1]


def test_bounds_json(capsys):
    code, out, _ = run(["bounds", "--theta", "60", "--gamma", "pi/9"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["status"] == "ok"
    assert rep["holevo"] == pytest.approx(33.4798843, rel=1e-8)
    assert rep["crb_trace"] <= rep["holevo"] <= 2 * rep["crb_trace"]
    assert rep["r_beta"] == pytest.approx(rep["stepwise_trace"] / rep["holevo"], rel=1e-8)
    assert rep["r_opt"] <= rep["r_beta"]


@pytest.mark.parametrize("sub", ["surface", "stepwise", "compare", "bounds"])
def test_help_mentions_units(sub, capsys):
    code, out, _ = run([sub, "--help"], capsys)
    assert code == 0
    assert "--theta" in out and "degrees" in out


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "qubitstep", "bounds", "--theta", "45", "--gamma", "20"],
        capture_output=True, text=True, check=True,
    )
    assert json.loads(proc.stdout)["status"] == "ok"
