import csv
import io
import json
import math
import subprocess
import sys

import pytest

from schatten_rho.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, main
from schatten_rho.experiments import (
    ExperimentConfig,
    expected_exp_witness,
    run,
    run_counterexample,
    run_radial_growth,
)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_counterexample_p2_row(capsys):
    code, out, _ = run_cli(capsys, "counterexample", "--p", "2", "--ns", "4", "--samples", "20000")
    assert code == EXIT_OK
    (row,) = parse_csv(out)
    assert float(row["n"]) == 4 and float(row["q"]) == 2.0
    assert float(row["schatten_q_norm"]) == pytest.approx(0.5, abs=1e-12)
    assert float(row["rho_p_upper"]) == pytest.approx(0.25, abs=1e-12)
    assert float(row["sqrt_hs_gap"]) == pytest.approx(1.0, abs=1e-12)
    assert float(row["op_gap"]) == pytest.approx(0.25, abs=1e-12)
    assert float(row["exp_witness_exact"]) == pytest.approx(4 / 9, abs=1e-12)


def test_counterexample_p1(capsys):
    code, out, _ = run_cli(capsys, "counterexample", "--p", "1", "--ns", "100", "--samples", "5000")
    assert code == EXIT_OK
    (row,) = parse_csv(out)
    assert float(row["q"]) == math.inf
    assert float(row["schatten_q_norm"]) == pytest.approx(0.01, abs=1e-15)
    assert float(row["rho_p_upper"]) == pytest.approx(0.005, abs=1e-15)


def test_counterexample_p_infinity_reports_trace_norm(capsys):
    code, out, _ = run_cli(capsys, "counterexample", "--p", "inf", "--ns", "1,10,100", "--format", "json")
    assert code == EXIT_OK
    table = json.loads(out)
    assert table["meta"]["bound_vanishes"] is False
    assert table["meta"]["q"] == 1.0
    assert [r["schatten_q_norm"] for r in table["rows"]] == pytest.approx([1.0, 1.0, 1.0], abs=1e-12)
    assert [r["rho_p_upper"] for r in table["rows"]] == pytest.approx([0.5] * 3, abs=1e-12)


def test_dim_pad_leaves_exact_columns_unchanged():
    base = run(ExperimentConfig("counterexample", ns=[3, 30], mc_samples=2000))
    padded = run(ExperimentConfig("counterexample", ns=[3, 30], mc_samples=2000, dim_pad=17))
    exact = ["schatten_q_norm", "rho_p_upper", "sqrt_hs_gap", "op_gap", "second_moment", "exp_witness_exact"]
    for a, b in zip(base.rows, padded.rows):
        assert b["d"] == a["d"] + 17
        for col in exact:
            assert b[col] == pytest.approx(a[col], abs=1e-12)
    assert padded.ok


def test_counterexample_self_check_columns():
    table = run_counterexample(ExperimentConfig("counterexample", ns=[2, 20, 200], mc_samples=5000))
    assert table.ok
    for row in table.rows:
        assert row["exp_witness_exact"] == pytest.approx(expected_exp_witness(row["n"]), abs=1e-12)


def test_radial_growth_slopes():
    t2 = run_radial_growth(ExperimentConfig("radial-growth", p=2.0))
    assert t2.ok and t2.meta["slope"] == pytest.approx(0.5, abs=0.05)
    tinf = run_radial_growth(ExperimentConfig("radial-growth", p=math.inf, offset=0.4))
    assert tinf.ok and abs(tinf.meta["slope"]) <= 0.01
    tc = run_radial_growth(ExperimentConfig("radial-growth", profile="constant"))
    assert tc.ok and all(v == 0.0 for v in tc.column("hessian_schatten_norm"))


def test_bounds_identical_rows_zero(capsys):
    code, out, _ = run_cli(capsys, "bounds", "--ns", "1,10")
    assert code == EXIT_OK
    for row in parse_csv(out):
        if row["pair"] == "identical":
            assert all(float(row[k]) == 0.0 for k in ("upper_bound", "sqrt_hs_gap", "op_gap", "second_moment_gap"))


def test_rho_lower_envelope(capsys):
    code, out, _ = run_cli(capsys, "rho-lower", "--ns", "4,64", "--samples", "20000")
    assert code == EXIT_OK
    rows = parse_csv(out)
    assert all(r["envelope_ok"] == "true" for r in rows)
    assert float(rows[0]["lower_value"]) > float(rows[1]["lower_value"])


def test_rho_lower_mc_method(capsys):
    code, out, _ = run_cli(capsys, "rho-lower", "--ns", "4", "--samples", "20000", "--method", "mc", "--budget", "40")
    assert code == EXIT_OK
    (row,) = parse_csv(out)
    assert float(row["lower_stderr"]) > 0


def test_interp_check_rows(capsys):
    code, out, _ = run_cli(capsys, "interp-check", "--dims", "1,3", "--samples", "100000")
    assert code == EXIT_OK
    rows = parse_csv(out)
    assert [r["ok"] for r in rows] == ["true", "true"]


def test_output_file_and_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": "inf", "ns": [2, 5], "samples": 3000, "seed": 4, "format": "json"}))
    out = tmp_path / "table.json"
    code, stdout, _ = run_cli(capsys, "counterexample", "--config", str(cfg), "--output", str(out))
    assert code == EXIT_OK and stdout == ""
    table = json.loads(out.read_text())
    assert table["meta"]["p"] == "inf" and [r["n"] for r in table["rows"]] == [2, 5]


def test_cli_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"ns": [2, 5], "samples": 3000}))
    code, out, _ = run_cli(capsys, "counterexample", "--config", str(cfg), "--ns", "7")
    assert code == EXIT_OK
    assert [r["n"] for r in parse_csv(out)] == ["7"]


@pytest.mark.parametrize(
    "argv, fragment",
    [
        (["counterexample", "--ns", "10,5"], "ns: must be strictly increasing"),
        (["counterexample", "--samples", "10"], "samples: must be at least 1000"),
        (["radial-growth", "--dims", "4,8"], "dims: radial-growth needs at least 3"),
        (["counterexample", "--sigma", "-1"], "sigma: must be positive"),
    ],
)
def test_config_errors_exit_3(capsys, argv, fragment):
    code, _, err = run_cli(capsys, *argv)
    assert code == EXIT_CONFIG
    assert fragment in err


def test_bad_json_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "ns": [1, 2],\n  "p": ,\n}\n')
    code, _, err = run_cli(capsys, "counterexample", "--config", str(cfg))
    assert code == EXIT_CONFIG
    assert f"{cfg}:3:" in err


def test_unknown_config_key_reports_line(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{\n  "ns": [1, 2],\n  "colour": 3\n}\n')
    code, _, err = run_cli(capsys, "counterexample", "--config", str(cfg))
    assert code == EXIT_CONFIG
    assert f"{cfg}:3: unknown config key 'colour'" in err


def test_argparse_error_exit_3(capsys):
    code, _, _ = run_cli(capsys, "counterexample", "--p", "0.3")
    assert code == EXIT_CONFIG
    code, _, _ = run_cli(capsys, "no-such-experiment")
    assert code == EXIT_CONFIG


def test_invariant_violation_exit_2(monkeypatch, capsys):
    import schatten_rho.experiments as ex

    monkeypatch.setattr(ex, "expected_exp_witness", lambda n: 0.0)
    code, _, err = run_cli(capsys, "counterexample", "--ns", "3", "--samples", "2000")
    assert code == EXIT_INVARIANT
    assert "invariant violated: n=3: exp_witness_exact" in err


def test_csv_floats_round_trip(capsys):
    code, out, _ = run_cli(capsys, "counterexample", "--ns", "3", "--samples", "2000")
    (row,) = parse_csv(out)
    table = run(ExperimentConfig("counterexample", ns=[3], mc_samples=2000))
    assert float(row["exp_witness_mc"]) == table.rows[0]["exp_witness_mc"]


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "schatten_rho", "bounds", "--ns", "2"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("pair,n,d,q,upper_bound")
