import csv
import io
import json
import subprocess
import sys

import pytest

from gdpep.cli import run_command
from gdpep.scalar import ProblemInstance
from gdpep.verify import CertifyConfig, certify


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_command(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_rate_example():
    code, out, _ = run("rate", "--N", "1", "--mu", "0", "--L", "1", "--gamma", "1.5", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["max_value"] == 0.25
    assert data["gamma_L"] == 1.5
    assert data["regime"] == "balanced"


def test_rate_human_mentions_bound():
    code, out, _ = run("rate", "--N", "1", "--mu", "0", "--gamma", "1.5")
    assert code == 0
    assert "max_value: 0.25" in out


def test_rate_negative_mu_nan_in_csv():
    code, out, _ = run("rate", "--N", "2", "--mu", "-0.3", "--gamma", "1.0", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["gamma", "branch_mu", "branch_rho", "bound", "min_form", "regime"]
    assert rows[1][1] == "nan" and rows[1][3] == "nan"


def test_certify_rejects_large_step(capsys):
    code, out, err = run("certify", "--N", "1", "--mu", "0", "--L", "1", "--gamma", "2.5")
    assert code == 2
    assert out == ""
    assert "gamma" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["rate", "--N", "1", "--mu", "0", "--gamma", "1", "--bogus", "3"],
        ["rate", "--N", "1", "--mu", "0"],
        ["rate", "--N", "0", "--mu", "0", "--gamma", "1"],
        ["rate", "--N", "1", "--mu", "2", "--L", "1", "--gamma", "1"],
        ["rate", "--N", "1", "--mu", "nan", "--gamma", "1"],
        ["rate", "--N", "1", "--mu", "0", "--gamma", "fast"],
        ["sweep", "--N", "1", "--mu", "0", "--gamma-min", "0.1", "--gamma-max", "2.5", "--steps", "3"],
        ["sweep", "--N", "1", "--mu", "0", "--gamma-min", "0.1", "--gamma-max", "1", "--steps", "-1"],
        ["simulate", "--N", "2", "--mu", "0.5", "--gamma", "1", "--family", "huber"],
        ["frobnicate"],
    ],
)
def test_invalid_input_exit_2(argv, capsys):
    code, out, err = run(*argv)
    assert code == 2
    assert out == ""
    assert err or capsys.readouterr().err


def test_unknown_flag_prints_usage(capsys):
    code, _, _ = run("rate", "--N", "1", "--mu", "0", "--gamma", "1", "--bogus", "3")
    assert code == 2
    assert "usage:" in capsys.readouterr().err


def test_sweep_rows(tmp_path):
    path = tmp_path / "rates.csv"
    code, out, _ = run(
        "sweep", "--N", "2", "--mu", "0", "--L", "1",
        "--gamma-min", "0.1", "--gamma-max", "1.9", "--steps", "19", "--out", str(path),
    )
    assert code == 0 and out == ""
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["gamma", "branch_mu", "branch_rho", "bound", "min_form", "regime"]
    assert len(rows) == 20
    assert float(rows[1][0]) == pytest.approx(0.1)
    assert float(rows[-1][0]) == pytest.approx(1.9)


def test_empty_sweep_is_header_only():
    code, out, _ = run("sweep", "--N", "2", "--mu", "0", "--gamma-min", "0.1", "--gamma-max", "1.9", "--steps", "0")
    assert code == 0
    assert out == "gamma,branch_mu,branch_rho,bound,min_form,regime\n"


def test_sweep_negative_mu_sentinels():
    code, out, _ = run("sweep", "--N", "3", "--mu", "-0.2", "--gamma-min", "0.5", "--gamma-max", "1.5", "--steps", "4")
    assert code == 0
    for row in list(csv.reader(io.StringIO(out)))[1:]:
        assert row[1] == "nan" and row[3] == "nan"
        assert float(row[4]) > 0


def test_sweep_seventeen_digits():
    _, out, _ = run("sweep", "--N", "1", "--mu", "0", "--gamma-min", "0.1", "--gamma-max", "0.1", "--steps", "1")
    gamma = out.splitlines()[1].split(",")[0]
    assert gamma == "0.10000000000000001"


def test_digits_override(monkeypatch):
    monkeypatch.setenv("GDPEP_DIGITS", "6")
    _, out, _ = run("sweep", "--N", "1", "--mu", "0", "--gamma-min", "0.1", "--gamma-max", "0.1", "--steps", "1")
    assert out.splitlines()[1].split(",")[0] == "0.1"


def test_certify_json_round_trip():
    code, out, _ = run("certify", "--N", "3", "--mu", "0.2", "--gamma", "0.7", "--format", "json")
    assert code == 0
    report = certify(ProblemInstance(3, 0.2, 1.0, 0.7), CertifyConfig())
    assert json.loads(out) == report.to_dict()


def test_certify_rational_exact():
    code, out, _ = run("certify", "--N", "1", "--mu", "0", "--gamma", "1.5", "--arithmetic", "rational", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["certified"] and data["bound_value"] == 0.25
    assert data["min_eigenvalue"] == 0.0


def test_certify_rational_needs_optimal_step():
    code, _, err = run("certify", "--N", "1", "--mu", "0", "--gamma", "1.0", "--arithmetic", "rational")
    assert code == 2
    assert "mp" in err


def test_certify_failure_exit_1():
    code, out, _ = run("certify", "--N", "2", "--mu", "0", "--gamma", "1", "--psd-tol", "-1", "--format", "json")
    assert code == 1
    assert json.loads(out)["failed_stages"] == ["psd"]


def test_optimal_step():
    code, out, _ = run("optimal-step", "--N", "1", "--mu", "0", "--format", "json")
    assert code == 0
    assert json.loads(out)["gamma_star"] == pytest.approx(1.5, abs=1e-12)


def test_gamma_opt_keyword():
    code, out, _ = run("certify", "--N", "4", "--mu", "0.1", "--gamma", "opt", "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["certified"]
    # float gamma* sits within an ulp of the root, so the mp surrogate barely moves
    assert data["surrogate"]["L_eff"] == pytest.approx(1.0, abs=1e-12)
    assert data["surrogate"]["mu_eff"] == pytest.approx(0.1, abs=1e-12)


def test_simulate_and_oracle():
    code, out, _ = run("simulate", "--N", "3", "--mu", "0", "--gamma", "1.0", "--family", "huber", "--format", "json")
    assert code == 0
    assert json.loads(out)["quotient"] <= 1 + 1e-9
    code, out, _ = run("oracle", "--N", "3", "--mu", "0.5", "--gamma", "1.9", "--format", "json")
    assert code == 0
    assert json.loads(out)["passed"] is True


def test_unwritable_output():
    code, out, err = run("rate", "--N", "1", "--mu", "0", "--gamma", "1", "--out", "/nonexistent/dir/x.csv")
    assert code == 1
    assert "cannot write" in err


COMMANDS = [
    ["rate", "--N", "5", "--mu", "0.3", "--gamma", "1.3", "--format", "json"],
    ["optimal-step", "--N", "5", "--mu", "-0.3"],
    ["certify", "--N", "3", "--mu", "-0.1", "--gamma", "1.9", "--format", "json"],
    ["sweep", "--N", "2", "--mu", "0", "--gamma-min", "0.1", "--gamma-max", "1.9", "--steps", "7"],
    ["simulate", "--N", "2", "--mu", "0.2", "--gamma", "1.0", "--family", "piecewise", "--trials", "200", "--seed", "5"],
    ["oracle", "--N", "2", "--mu", "0.2", "--gamma", "1.0", "--seed", "3", "--format", "csv"],
]


@pytest.mark.parametrize("argv", COMMANDS, ids=[c[0] for c in COMMANDS])
def test_byte_identical_runs(argv):
    first = subprocess.run([sys.executable, "-m", "gdpep", *argv], capture_output=True)
    second = subprocess.run([sys.executable, "-m", "gdpep", *argv], capture_output=True)
    assert first.returncode == second.returncode
    assert first.stdout == second.stdout
    assert first.stdout
