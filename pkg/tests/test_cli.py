import json

import pytest

from singlering import cli
from singlering.config import settings
from singlering.services.errors import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK
from singlering.utils.export import read_csv


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "theta": {"family": "two-atom", "atoms": [[0.5, 0.5], [2.0, 0.5]]},
        "n_list": [20, 40],
        "trials": 2,
        "probes": [{"re": 0.3}, {"re": 1.0, "eps": 0.2}],
    }))
    return str(path)


def test_sample_writes_eigenvalue_cloud(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["sample", "--n", "10", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "eigenvalues.csv")
    assert len(rows) == 10 * 20


def test_sd_solve_point(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["sd-solve", "--rho", "1.0", "--re", "0.5", "--im", "0.01", "--out", str(out)]) == EXIT_OK
    row = read_csv(out / "sd_solve.csv")[0]
    assert list(row) == cli.SOLVE_FIELDS
    assert float(row["G_im"]) < 0


def test_support_and_sticking_experiments(tmp_path, small_config):
    out = tmp_path / "out"
    assert cli.main(["support-exp", "--config", small_config, "--out", str(out), "--threads", "2"]) == EXIT_OK
    assert (out / "support_report.json").exists()
    assert cli.main(["sticking-exp", "--config", small_config, "--out", str(out)]) == EXIT_OK
    assert len(read_csv(out / "sticking.csv")) == 4


def test_seed_override_changes_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["sample", "--n", "5", "--seed", "1", "--out", str(a)])
    cli.main(["sample", "--n", "5", "--seed", "2", "--out", str(b)])
    assert (a / "eigenvalues.csv").read_bytes() != (b / "eigenvalues.csv").read_bytes()


def test_missing_config_exits_with_config_code(tmp_path):
    assert cli.main(["sample", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_invalid_override_exits_with_config_code(tmp_path):
    assert cli.main(["sample", "--threads", "0", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_solver_failure_exits_with_numeric_code(monkeypatch, tmp_path):
    monkeypatch.setattr(settings, "SD_MAX_ITER", 1)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"n_list": [40], "tolerances": {"solver_tol": 1e-300}}))
    argv = ["sd-solve", "--config", str(path), "--rho", "1.0", "--re", "0.9", "--im", "1e-4", "--out", str(tmp_path)]
    assert cli.main(argv) == EXIT_NUMERIC


def test_unknown_command_is_rejected():
    with pytest.raises(SystemExit):
        cli.main(["fly"])
