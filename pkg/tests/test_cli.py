import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from tncircuits.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main, preset_names, relative_deviation


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_presets_listed(capsys):
    code, out, _ = run(capsys, "presets")
    assert code == EXIT_OK
    names = out.split()
    assert names == preset_names()
    assert "rac-depth-separation" in names and not any(n.endswith(".tn") for n in names)


@pytest.mark.parametrize("preset", ["cac-tree-n4", "rac-deep-n3", "cac-overlap-n4"])
def test_verify_equivalence_fixtures_pass(capsys, preset, tmp_path):
    report = tmp_path / "r.csv"
    code, out, _ = run(capsys, "verify-equivalence", "--preset", preset, "--out", str(report))
    assert code == EXIT_OK and "PASS" in out
    lines = report.read_text().splitlines()
    assert lines[1] == "config,network,circuit,rel_dev"
    n_rows = len([l for l in lines if not l.startswith("#")]) - 1
    assert n_rows == {"cac-tree-n4": 16, "rac-deep-n3": 8, "cac-overlap-n4": 16}[preset]


def test_corrupted_fixture_fails_with_first_configuration(capsys):
    code, out, _ = run(capsys, "verify-equivalence", "--preset", "cac-tree-n4-corrupted")
    assert code == EXIT_FAIL
    line = [l for l in out.splitlines() if l.startswith("FAIL")][0]
    assert "first failing configuration" in line
    dev = float(line.rsplit("deviation ", 1)[1].rstrip(")"))
    assert dev > 1e-10


def test_verify_with_explicit_tn(capsys, tmp_path):
    net = tmp_path / "n.json"
    assert run(capsys, "build", "--preset", "rac-deep-n3", "--out", str(net))[0] == EXIT_OK
    code, _, _ = run(capsys, "verify-equivalence", "--preset", "rac-deep-n3", "--tn", str(net))
    assert code == EXIT_OK
    code, out, _ = run(capsys, "verify-equivalence", "--preset", "rac-deep-n3", "--tn", str(net),
                       "--seed", "99")
    assert code == EXIT_FAIL  # network built from other weights


def test_tolerance_flag(capsys):
    code, _, _ = run(capsys, "verify-equivalence", "--preset", "cac-tree-n4-corrupted",
                     "--tolerance", "10")
    assert code == EXIT_OK


def test_no_cloning(capsys):
    code, out, _ = run(capsys, "no-cloning", "2", "3", "5", "--format", "json")
    assert code == EXIT_OK
    rows = json.loads(out)
    assert [r["dim"] for r in rows] == [2, 3, 5]
    assert all(r["basis_cloned"] for r in rows)
    assert rows[0]["counterexample_violation"] == pytest.approx(1.0, abs=1e-12)
    assert all(r["counterexample_violation"] >= 1 - 1e-12 for r in rows)


def test_no_cloning_trivial_dimension(capsys):
    code, out, _ = run(capsys, "no-cloning", "1")
    assert code == EXIT_OK and "trivial" in out and "basis_cloned=True" in out
    assert run(capsys, "no-cloning", "0")[0] == EXIT_USAGE


def test_scaling_checks_and_csv(capsys):
    code, out, err = run(capsys, "scaling", "--preset", "rac-shallow-cap", "--trials", "20")
    assert code == EXIT_OK and "[PASS]" in err
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["a_size"]) for r in rows] == list(range(1, 8))
    assert all(int(r["best_rank"]) <= 2 for r in rows)


def test_scaling_failed_check_exits_one(capsys, tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("family: rac\nbase: {N: 6, M: 2, R: 2, L: 2}\npartition: {kind: middle}\n"
                   "sweep: {}\ntrials: 20\nseed: 0\n"
                   "checks: [{check: at_most, field: best_rank, value: 1}]\n")
    code, _, err = run(capsys, "scaling", "--config", str(cfg))
    assert code == EXIT_FAIL and "[FAIL]" in err


def test_scaling_bits(capsys):
    _, nats, _ = run(capsys, "scaling", "--preset", "rac-shallow-cap", "--trials", "5")
    _, bits, _ = run(capsys, "scaling", "--preset", "rac-shallow-cap", "--trials", "5", "--bits")
    for a, b in zip(csv.DictReader(io.StringIO(nats)), csv.DictReader(io.StringIO(bits))):
        assert float(b["best_ee"]) == pytest.approx(float(a["best_ee"]) / math.log(2), rel=1e-15)


def test_scaling_json_and_timing(capsys):
    code, out, _ = run(capsys, "scaling", "--preset", "rac-shallow-cap", "--trials", "3",
                       "--format", "json", "--timing")
    assert code == EXIT_OK
    rows = json.loads(out)
    assert len(rows) == 7 and all("wall_time" in r for r in rows)


def test_empty_grid(capsys):
    code, out, _ = run(capsys, "scaling", "--preset", "empty-grid")
    assert code == EXIT_OK
    assert out.count("\n") == 1 and out.startswith("family,")


def test_budget_skips_rows(capsys):
    code, out, _ = run(capsys, "scaling", "--preset", "rac-shallow-cap", "--trials", "2",
                       "--budget", "16")
    assert code == EXIT_OK
    assert {r["status"] for r in csv.DictReader(io.StringIO(out))} == {"skipped"}


@pytest.mark.parametrize("argv", [
    ["verify-equivalence", "--preset", "cac-tree-n4", "--dry-run"],
    ["scaling", "--preset", "rac-depth-separation", "--dry-run"],
    ["build", "--preset", "rac-deep-n3", "--dry-run"],
    ["no-cloning", "3", "--dry-run"],
    ["presets", "--dry-run"],
])
def test_dry_run_prints_plan_only(capsys, argv, tmp_path):
    code, out, _ = run(capsys, *argv, *(["--out", str(tmp_path / "o")] if argv[0] == "build"
                                         else []))
    assert code == EXIT_OK
    plan = json.loads(out)
    assert plan["subcommand"] == argv[0]
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["scaling"],
    ["scaling", "--preset", "no-such-preset"],
    ["scaling", "--config", "/nonexistent.yaml"],
    ["scaling", "--preset", "rac-shallow-cap", "--config", "x.yaml"],
    ["scaling", "--preset", "rac-shallow-cap", "--trials", "0"],
    ["scaling", "--preset", "rac-shallow-cap", "--format", "xml"],
    ["verify-equivalence", "--preset", "cac-tree-n4", "--budget", "2"],
    ["no-cloning", "two"],
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_seedless_sweep_is_a_usage_error(capsys, tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("family: rac\nbase: {N: 4}\npartition: {kind: middle}\ntrials: 2\n")
    assert run(capsys, "scaling", "--config", str(cfg))[0] == EXIT_USAGE
    assert run(capsys, "scaling", "--config", str(cfg), "--seed", "1")[0] == EXIT_OK


def test_seedless_circuit_is_a_usage_error(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("kind: rac\nN: 3\nL: 2\n")
    assert run(capsys, "verify-equivalence", "--config", str(cfg))[0] == EXIT_USAGE
    assert run(capsys, "verify-equivalence", "--config", str(cfg), "--seed", "4")[0] == EXIT_OK


def test_relative_deviation_floor():
    ref = np.array([1.0, 1e-20, 0.0])
    dev = relative_deviation(ref + np.array([1e-12, 1e-20, 0.0]), ref)
    assert dev[0] == pytest.approx(1e-12) and dev[1] == pytest.approx(1e-8) and dev[2] == 0


def test_console_script_runs_in_a_fresh_process(tmp_path):
    out = tmp_path / "o.csv"
    res = subprocess.run([sys.executable, "-m", "tncircuits.cli", "scaling", "--preset",
                          "rac-shallow-cap", "--trials", "4", "--out", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert out.read_text().startswith("family,")
