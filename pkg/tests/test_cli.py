import subprocess
import sys

import numpy as np
import pytest
import yaml

from poclm.cli import EXIT_CONFIG, EXIT_DATA, EXIT_EXPERIMENT, EXIT_FIT, EXIT_OK, main
from poclm.datasets import bundled_path, read_csv, write_csv
from poclm.simulation import boundary_truth, generate_dataset

COLUMNS = {
    "y": {"role": "response", "levels": [1, 2, 3, 4]},
    "op1": {"role": "ordinal", "levels": [1, 2, 3], "constraint": "either"},
    "op2": {"role": "ordinal", "levels": [1, 2, 3, 4], "constraint": "either"},
}


@pytest.fixture
def small_run(tmp_path):
    """A config and CSV for a 400-row draw from the boundary truth."""
    table = generate_dataset(boundary_truth("small"), 400, 3)
    table["y"] = table.pop(boundary_truth().spec.response)
    write_csv(table, tmp_path / "small.csv")
    cfg = {"data": "small.csv", "columns": COLUMNS, "inference": {"grid_points": 5},
           "region": {"variable": "op1"}, "test": {"variable": "op2", "hypothesis": "no-effect"},
           "output": str(tmp_path / "out")}
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def rewrite(path, **changes):
    doc = yaml.safe_load(path.read_text())
    doc.update(changes)
    path.write_text(yaml.safe_dump(doc))
    return path


def school_config(tmp_path, **inference):
    doc = yaml.safe_load(bundled_path("school.yaml").read_text())
    doc["data"] = str(bundled_path("school_synthetic.csv"))
    doc["inference"].update(inference)
    doc["output"] = str(tmp_path / "school")
    path = tmp_path / "school.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


# --- fit ---------------------------------------------------------------------------

def test_fit_writes_report_and_estimates(small_run, tmp_path, capsys):
    assert main(["fit", "--config", str(small_run)]) == EXIT_OK
    report = (tmp_path / "out" / "report.txt").read_text()
    assert "UMLE" in report and "CMLE" in report and "log-likelihood" in report
    assert "Wald 95% intervals" in report
    est = read_csv(tmp_path / "out" / "estimates.csv")
    assert list(est) == ["parameter", "umle", "cmle", "se_umle", "ci_lower", "ci_upper"]
    assert "op2: anti" in capsys.readouterr().out


def test_fit_is_deterministic(small_run, tmp_path):
    main(["fit", "--config", str(small_run), "--out", str(tmp_path / "a")])
    main(["fit", "--config", str(small_run), "--out", str(tmp_path / "b")])
    for name in ("report.txt", "estimates.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fit_round_trip_converges_quickly(small_run, tmp_path):
    main(["fit", "--config", str(small_run)])
    est = tmp_path / "out" / "estimates.csv"
    main(["fit", "--config", str(small_run), "--init", str(est), "--out", str(tmp_path / "again")])
    lines = (tmp_path / "again" / "report.txt").read_text().splitlines()
    iters = next(line for line in lines if line.startswith("iterations")).split()[1:]
    assert all(int(i) <= 2 for i in iters)


def test_empty_csv_is_data_error(small_run, tmp_path, capsys):
    (tmp_path / "empty.csv").write_text("")
    assert main(["fit", "--config", str(small_run), "--data", str(tmp_path / "empty.csv")]) == EXIT_DATA
    assert "data error" in capsys.readouterr().err


def test_header_only_csv_is_data_error(small_run, tmp_path):
    (tmp_path / "head.csv").write_text("y,op1,op2\n")
    assert main(["fit", "--config", str(small_run), "--data", str(tmp_path / "head.csv")]) == EXIT_DATA


def test_undeclared_level_is_data_error(small_run, tmp_path):
    (tmp_path / "bad.csv").write_text("y,op1,op2\n1,1,1\n2,9,2\n")
    assert main(["fit", "--config", str(small_run), "--data", str(tmp_path / "bad.csv")]) == EXIT_DATA


def test_missing_data_file_is_data_error(small_run, tmp_path):
    assert main(["fit", "--config", str(small_run), "--data", str(tmp_path / "nope.csv")]) == EXIT_DATA


def test_undeclared_variable_is_config_error(small_run, capsys):
    rewrite(small_run, test={"variable": "op9", "hypothesis": "no-effect"})
    assert main(["test", "--config", str(small_run)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_declared_column_missing_from_csv_is_config_error(small_run):
    cols = dict(COLUMNS, extra={"role": "numeric"})
    rewrite(small_run, columns=cols)
    assert main(["fit", "--config", str(small_run)]) == EXIT_CONFIG


@pytest.mark.parametrize("doc", [
    "columns: {}\n",
    "columns: {y: {role: response, levels: [1, 2]}, x: {role: wobbly}}\n",
    "columns: {x: {role: numeric}}\n",
    "columns: {y: {role: response, levels: [1, 2]}}\nsurprise: 1\n",
    "columns: {y: {role: response, levels: [1, 2]}}\ninference: {level: 2}\n",
    "[not, a, mapping]\n",
])
def test_invalid_configs(tmp_path, doc):
    path = tmp_path / "bad.yaml"
    path.write_text(doc)
    assert main(["fit", "--config", str(path)]) == EXIT_CONFIG


def test_missing_config_is_config_error():
    assert main(["fit", "--config", "no_such_config_anywhere"]) == EXIT_CONFIG


def test_non_convergence_exit_and_report(small_run, tmp_path):
    rewrite(small_run, fit={"max_iter": 1})
    assert main(["fit", "--config", str(small_run)]) == EXIT_FIT
    report = (tmp_path / "out" / "report.txt").read_text()
    assert "did not converge" in report


# --- region ------------------------------------------------------------------------

def test_region_grid_csv(small_run, tmp_path, capsys):
    assert main(["region", "--config", str(small_run)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "members:" in out and "CCR outside UCCR" in out and "case" in out
    rows = (tmp_path / "out" / "region_op1.csv").read_text().splitlines()
    assert rows[0] == "axis1,axis2,lr_unconstrained,lr_constrained,ucr,uccr,ccr,acr,direction_class,indeterminate"
    assert len(rows) == 1 + 25
    assert any(r.split(",")[4] == "1" for r in rows[1:])


def test_region_contrast_no_opposite_sign_members(tmp_path):
    cfg = school_config(tmp_path, grid_points=9)
    code = main(["region", "--config", str(cfg), "--variable", "perf2016", "--df", "3",
                 "--contrast", "High=1,Medium=-1", "--contrast", "Medium=1,Medium-Low=-1"])
    assert code == EXIT_OK
    files = list((tmp_path / "school").glob("region_perf2016*.csv"))
    assert len(files) == 1
    table = read_csv(files[0])
    acr = np.asarray(table["acr"], dtype=float) == 1
    a1 = np.asarray(table["axis1"], dtype=float)[acr]
    a2 = np.asarray(table["axis2"], dtype=float)[acr]
    assert acr.any()
    # the constrained fit has both differences negative
    assert np.all(a1 <= 0) and np.all(a2 <= 0)


def test_region_bad_contrast_is_config_error(small_run):
    assert main(["region", "--config", str(small_run), "--variable", "op2", "--contrast", "9=1"]) == EXIT_CONFIG


# --- test --------------------------------------------------------------------------

def test_test_no_effect_prints_p_value(small_run, capsys):
    assert main(["test", "--config", str(small_run)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "decision:   REJECT" in out
    p_line = next(line for line in out.splitlines() if line.startswith("p-value"))
    float(p_line.split()[1])


@pytest.mark.parametrize("args", [
    ["--hypothesis", "monotonicity"],
    ["--hypothesis", "non-monotonicity"],
    ["--hypothesis", "direction", "--direction", "iso"],
])
def test_other_hypotheses_never_print_p_value(small_run, capsys, args):
    assert main(["test", "--config", str(small_run), "--variable", "op2", *args]) == EXIT_OK
    out = capsys.readouterr().out
    assert "p-value:    decision-only (no valid p-value)" in out
    for line in out.splitlines():
        assert not line.startswith("p-value:    0")


def test_direction_needs_direction(small_run):
    assert main(["test", "--config", str(small_run), "--variable", "op2", "--hypothesis", "direction"]) == EXIT_CONFIG


def test_school_decisions_via_cli(tmp_path, capsys):
    cfg = str(school_config(tmp_path))
    expected = [
        (["--hypothesis", "no-effect"], "REJECT"),
        (["--hypothesis", "monotonicity"], "FAIL TO REJECT"),
        (["--hypothesis", "direction", "--direction", "iso"], "REJECT"),
    ]
    for args, decision in expected:
        assert main(["test", "--config", cfg, "--variable", "funding", *args]) == EXIT_OK
        line = next(x for x in capsys.readouterr().out.splitlines() if x.startswith("decision"))
        assert line.split(":", 1)[1].strip().startswith(decision + " at")


# --- simulate ------------------------------------------------------------------------

def experiment_config(tmp_path, **changes):
    doc = {"name": "tiny", "experiment": "both", "seed": 9, "replicates": 3, "sample_sizes": [150],
           "kinds": ["uccr", "ccr", "acr"], "truth": {"preset": "boundary", "degree": "small"}}
    doc.update(changes)
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


def test_simulate_outputs_and_determinism(tmp_path):
    cfg = str(experiment_config(tmp_path))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")]) == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(["config_echo.yaml", "tiny_coverage.csv", "tiny_coverage.txt",
                            "tiny_coverage_diagnostics.csv", "tiny_rejection.csv", "tiny_rejection.txt",
                            "tiny_rejection_diagnostics.csv"])
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    echo = yaml.safe_load((tmp_path / "a" / "config_echo.yaml").read_text())
    assert echo["seed"] == 9 and echo["truth"]["label"] == "boundary/small"


def test_simulate_single_replicate(tmp_path):
    cfg = str(experiment_config(tmp_path, experiment="coverage"))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o"), "--replicates", "1"]) == EXIT_OK
    table = read_csv(tmp_path / "o" / "tiny_coverage.csv")
    assert set(np.asarray(table["percent"], dtype=str)) <= {"0.0", "100.0", "-"}


def test_simulate_zero_replicates_is_config_error(tmp_path):
    cfg = str(experiment_config(tmp_path))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o"), "--replicates", "0"]) == EXIT_CONFIG


def test_simulate_all_excluded_is_experiment_error(tmp_path):
    # ten observations over four response categories almost never fill every category
    cfg = str(experiment_config(tmp_path, sample_sizes=[2], replicates=2, experiment="coverage"))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_EXPERIMENT


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "poclm.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("fit", "region", "test", "simulate"):
        assert sub in res.stdout
