"""End-to-end checks of the ``hv`` command line."""

import math
import os
import shutil
import subprocess
import sys

import pytest
import yaml

from hybrid_volterra.cli import main
from hybrid_volterra.problem_io import read_solution_csv

EXP_FILE = """\
horizon: 1.0
x0: "1"
f1: "x"
lipschitz: {L1: 1.0}
"""

STEP_FILE = """\
horizon: 2.0
x0: "1"
G1: "1"
tau: [1.0]
h: 0.5
"""

CROWDED_FILE = """\
horizon: 2.0
x0: "1"
G1: "1"
tau: [1.0, 1.2]
h: 0.5
"""

SERIES_FILE = """\
kind: series
horizon: 1.0
y0: "1"
kernels: ["x1"]
lipschitz: [1.0]
"""

MOVING_FILE = """\
horizon: 1.0
x0: "0"
sigma: ["0.5*t"]
"""

HALF = ["0.5", "0", "0", "0", "0.5", "0", "0", "0", "0.5"]


def _run(capsys, *argv):
    with pytest.raises(SystemExit) as excinfo:
        main(list(argv))
    out, err = capsys.readouterr()
    code = excinfo.value.code
    return (0 if code is None else code), out, err


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, text in [
        ("exp", EXP_FILE), ("step", STEP_FILE), ("crowded", CROWDED_FILE),
        ("series", SERIES_FILE), ("moving", MOVING_FILE),
    ]:
        path = tmp_path / f"{name}.yaml"
        path.write_text(text)
        paths[name] = str(path)
    return paths


class TestSolve:
    def test_exponential_to_csv(self, capsys, tmp_path, files):
        out_csv = str(tmp_path / "x.csv")
        code, out, _ = _run(capsys, "solve", files["exp"], "--out", out_csv)
        assert code == 0
        assert "converged: true" in out
        assert "note: " in out  # weight picked from the declared constants
        t, left, right = read_solution_csv(out_csv)
        assert t[-1] == 1.0
        assert left[-1] == pytest.approx(math.e, abs=1e-4)
        assert right[-1] == left[-1]

    def test_segment_method_on_step(self, capsys, tmp_path, files):
        out_csv = str(tmp_path / "x.csv")
        code, out, _ = _run(
            capsys, "solve", files["step"], "--method", "segment", "--out", out_csv
        )
        assert code == 0 and "method: segment" in out
        t, left, right = read_solution_csv(out_csv)
        i = list(t).index(1.0)
        assert (left[i], right[i]) == (1.0, 2.0)

    def test_report_file(self, capsys, tmp_path, files):
        report_path = tmp_path / "report.yaml"
        code, _, _ = _run(
            capsys, "solve", files["step"], "--report", str(report_path)
        )
        assert code == 0
        report = yaml.safe_load(report_path.read_text())
        assert report["method"] == "picard" and report["converged"] is True
        assert report["separation"]["ok"] is True
        (jump,) = report["jumps"]
        assert jump["t"] == 1.0
        assert jump["predicted_jump"] == pytest.approx(1.0, abs=1e-12)
        assert jump["mismatch"] < 1e-10
        assert any("strict" in line for line in report["conventions"])

    def test_contraction_block_in_report(self, capsys, tmp_path, files):
        report_path = tmp_path / "report.yaml"
        code, _, _ = _run(
            capsys, "solve", files["exp"], "--report", str(report_path)
        )
        assert code == 0
        block = yaml.safe_load(report_path.read_text())["contraction"]
        assert block["constants"]["L1"] == 1.0
        assert block["contractive_criterion"] is True
        assert block["contractive_eigen"] is True
        assert block["spectral_radius"] < 1.0

    def test_explicit_mu_echoed(self, capsys, files):
        code, out, _ = _run(capsys, "solve", files["exp"], "--mu", "5.0")
        assert code == 0 and "mu: 5.0" in out

    def test_bad_expression_exits_1(self, capsys, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("horizon: 1.0\nx0: '1 +* t'\n")
        code, _, err = _run(capsys, "solve", str(path))
        assert code == 1
        assert err.startswith("error:") and "position" in err

    def test_missing_file_exits_1(self, capsys, tmp_path):
        code, _, err = _run(capsys, "solve", str(tmp_path / "nope.yaml"))
        assert code == 1 and "error:" in err

    def test_series_file_redirected(self, capsys, files):
        code, _, err = _run(capsys, "solve", files["series"])
        assert code == 1 and "series-solve" in err

    def test_nonconvergence_exits_3_after_writing(self, capsys, tmp_path, files):
        report_path = tmp_path / "report.yaml"
        code, _, err = _run(
            capsys, "solve", files["exp"], "--kmax", "1",
            "--report", str(report_path),
        )
        assert code == 3 and "did not converge" in err
        assert yaml.safe_load(report_path.read_text())["converged"] is False

    def test_separation_gate(self, capsys, files):
        code, _, _ = _run(capsys, "solve", files["crowded"])
        assert code == 0  # without the flag a crowded schedule still solves
        code, _, err = _run(
            capsys, "solve", files["crowded"], "--require-separation"
        )
        assert code == 2 and "tau" in err

    def test_bad_tol_exits_1(self, capsys, files):
        code, _, _ = _run(capsys, "solve", files["exp"], "--tol", "-1")
        assert code == 1

    def test_usage_errors_exit_1(self, capsys, files):
        assert _run(capsys)[0] == 1
        assert _run(capsys, "solve", files["exp"], "--bad-flag")[0] == 1


class TestAnalyze:
    def test_report_fields(self, capsys, files):
        code, out, _ = _run(capsys, "analyze", files["exp"])
        assert code == 0
        report = yaml.safe_load(out)
        assert report["horizon"] == 1.0
        assert report["separation"]["ok"] is True
        assert report["lipschitz_source"] == "declared in problem file"
        block = report["contraction"]
        assert block["mu_star"] > 0
        assert block["contractive_criterion"] is True
        assert block["contractive_eigen"] is True
        assert len(block["matrix"]) == 3
        assert len(block["criterion_quantities"]) == 4

    def test_explicit_mu_skips_search(self, capsys, files):
        code, out, _ = _run(capsys, "analyze", files["exp"], "--mu", "5.0")
        assert code == 0
        block = yaml.safe_load(out)["contraction"]
        assert block["mu"] == 5.0 and "mu_star" not in block

    def test_schedule_fields(self, capsys, files):
        code, out, _ = _run(capsys, "analyze", files["moving"])
        assert code == 0
        report = yaml.safe_load(out)
        assert report["sigma"] == ["0.5 * t"]
        assert report["sigma_roots"] == [[0.0]]
        assert report["partition"] == [0.0, 1.0]

    def test_without_constants(self, capsys, files):
        code, out, _ = _run(capsys, "analyze", files["step"])
        assert code == 0
        report = yaml.safe_load(out)
        assert report["contraction"] is None and "declare" in report["note"]

    def test_estimate_recovers_linear_slope(self, capsys, files, monkeypatch):
        monkeypatch.setenv("HV_SEED", "0")
        code, out, _ = _run(capsys, "analyze", files["exp"], "--estimate")
        assert code == 0
        report = yaml.safe_load(out)
        assert "seed 0" in report["lipschitz_source"]
        # f1 = x has slope exactly 1; the 1.1 safety factor is reported as-is
        assert report["contraction"]["constants"]["L1"] == pytest.approx(
            1.1, rel=1e-3
        )

    def test_estimate_is_deterministic(self, capsys, files, monkeypatch):
        monkeypatch.setenv("HV_SEED", "7")
        first = _run(capsys, "analyze", files["exp"], "--estimate")
        second = _run(capsys, "analyze", files["exp"], "--estimate")
        assert first == second

    def test_seed_env_changes_label(self, capsys, files, monkeypatch):
        monkeypatch.setenv("HV_SEED", "17")
        _, out, _ = _run(capsys, "analyze", files["exp"], "--estimate")
        assert "seed 17" in yaml.safe_load(out)["lipschitz_source"]

    def test_bad_seed_exits_1(self, capsys, files, monkeypatch):
        monkeypatch.setenv("HV_SEED", "lots")
        code, _, err = _run(capsys, "analyze", files["exp"], "--estimate")
        assert code == 1 and "HV_SEED" in err

    def test_bad_state_bound_exits_1(self, capsys, files):
        code, _, _ = _run(
            capsys, "analyze", files["exp"], "--estimate", "--state-bound", "-2"
        )
        assert code == 1

    def test_require_h7_alias(self, capsys, files):
        code, _, err = _run(capsys, "analyze", files["crowded"], "--require-h7")
        assert code == 2 and "separation requirement failed" in err

    def test_report_file_matches_stdout(self, capsys, tmp_path, files):
        report_path = tmp_path / "analysis.yaml"
        _, out, _ = _run(
            capsys, "analyze", files["exp"], "--report", str(report_path)
        )
        assert yaml.safe_load(report_path.read_text()) == yaml.safe_load(out)


class TestSeriesSolve:
    def test_exponential(self, capsys, tmp_path, files):
        out_csv = str(tmp_path / "y.csv")
        code, out, _ = _run(capsys, "series-solve", files["series"], "--out", out_csv)
        assert code == 0
        assert "order: 1" in out and "converged: true" in out
        t, left, _ = read_solution_csv(out_csv)
        assert left[-1] == pytest.approx(math.e, abs=1e-4)

    def test_report_has_coefficient(self, capsys, tmp_path, files):
        report_path = tmp_path / "report.yaml"
        code, _, _ = _run(
            capsys, "series-solve", files["series"], "--report", str(report_path)
        )
        assert code == 0
        report = yaml.safe_load(report_path.read_text())
        assert report["method"] == "series" and report["order"] == 1
        assert 0.0 < report["contraction_coefficient"] <= 0.5

    def test_hybrid_file_redirected(self, capsys, files):
        code, _, err = _run(capsys, "series-solve", files["exp"])
        assert code == 1 and "hv solve" in err

    def test_nonconvergence_exits_3(self, capsys, files):
        code, _, _ = _run(capsys, "series-solve", files["series"], "--kmax", "1")
        assert code == 3


class TestConvergenceReport:
    def test_table_layout_and_ratios(self, capsys, files):
        code, out, _ = _run(
            capsys, "convergence-report", files["exp"], "--resolutions", "16,32,64"
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].split() == ["panels", "sup_error", "ratio"]
        rows = [line.split() for line in lines[1:]]
        assert [r[0] for r in rows] == ["16", "32", "64"]
        assert rows[0][2] == "-"
        assert all(3.0 < float(r[2]) < 5.0 for r in rows[1:])

    def test_two_resolutions_note(self, capsys, files):
        code, out, _ = _run(
            capsys, "convergence-report", files["exp"], "--resolutions", "16,32"
        )
        assert code == 0 and "degenerate" in out

    def test_single_resolution_exits_1(self, capsys, files):
        code, _, err = _run(
            capsys, "convergence-report", files["exp"], "--resolutions", "16"
        )
        assert code == 1 and "error:" in err

    def test_non_doubling_exits_1(self, capsys, files):
        code, _, _ = _run(
            capsys, "convergence-report", files["exp"], "--resolutions", "16,24"
        )
        assert code == 1

    def test_malformed_list_exits_1(self, capsys, files):
        code, _, err = _run(
            capsys, "convergence-report", files["exp"], "--resolutions", "a,b"
        )
        assert code == 1 and "comma-separated" in err

    def test_report_file_rows(self, capsys, tmp_path, files):
        report_path = tmp_path / "table.yaml"
        code, _, _ = _run(
            capsys, "convergence-report", files["exp"],
            "--resolutions", "16,32,64", "--report", str(report_path),
        )
        assert code == 0
        rows = yaml.safe_load(report_path.read_text())["rows"]
        assert [r["panels"] for r in rows] == [16, 32, 64]
        assert "ratio" not in rows[0] and rows[2]["ratio"] > 3.0


class TestRoots:
    def test_moving_impulse(self, capsys, files):
        code, out, _ = _run(capsys, "roots", files["moving"])
        assert code == 0
        assert "sigma[0] = 0.5 * t: roots [0.0]" in out
        assert "breakpoints: [0.0]" in out

    def test_no_moving_impulses(self, capsys, files):
        code, out, _ = _run(capsys, "roots", files["step"])
        assert code == 0
        assert "no moving impulses" in out and "breakpoints: [1.0]" in out


class TestCheckMatrix:
    def test_contractive_diagonal(self, capsys):
        code, out, _ = _run(capsys, "check-matrix", *HALF)
        assert code == 0
        assert "trace: 1.5" in out
        assert "pair_sum: 0.75" in out
        assert "det: 0.125" in out
        assert "criterion quantities: 0.125, 1.125, 3.375, 3.375" in out
        assert "contractive by criterion: true" in out
        assert "spectral radius: 0.5" in out
        assert "contractive by eigenvalues: true" in out

    def test_identity_not_contractive(self, capsys):
        one = ["1", "0", "0", "0", "1", "0", "0", "0", "1"]
        code, out, _ = _run(capsys, "check-matrix", *one)
        assert code == 0
        assert "contractive by criterion: false" in out
        assert "contractive by eigenvalues: false" in out

    def test_wrong_arity_exits_1(self, capsys):
        assert _run(capsys, "check-matrix", "1", "2")[0] == 1

    def test_non_numeric_exits_1(self, capsys):
        bad = ["x"] + ["0"] * 8
        assert _run(capsys, "check-matrix", *bad)[0] == 1


class TestInstalledEntryPoints:
    def test_console_script_on_path(self):
        assert shutil.which("hv") is not None

    def test_module_runs_are_byte_identical(self, tmp_path, files):
        env = dict(os.environ, HV_SEED="3")
        cmd = [
            sys.executable, "-m", "hybrid_volterra.cli",
            "analyze", files["exp"], "--estimate",
        ]
        first = subprocess.run(cmd, capture_output=True, env=env)
        second = subprocess.run(cmd, capture_output=True, env=env)
        assert first.returncode == 0
        assert first.stdout == second.stdout
        assert yaml.safe_load(first.stdout)["contraction"]["mu_star"] > 0
