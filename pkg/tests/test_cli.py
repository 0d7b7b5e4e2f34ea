import csv
import subprocess
import sys

import pytest

from leki.cli import main

TINY = '''experiment = "linear"
dims = [3]
ensemble_sizes = [4]
trials = 2
seed = 11
[localization]
scheme = "linearized"
kernel = "identity"
[stopping]
max_iterations = 5
'''


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "tiny.toml"
    p.write_text(TINY)
    return p


def test_run_writes_records(config, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out), "--json"]) == 0
    assert (out / "linear_summary.csv").exists()
    assert (out / "linear_trials.json").exists()
    assert (out / "linear_d3_J4_leki_t001.csv").exists()
    with open(out / "linear_d3_J4_eki_t000.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5 and rows[0]["iter"] == "1"
    assert "mean misfit" in capsys.readouterr().out


def test_run_env_output_dir(config, tmp_path, monkeypatch):
    monkeypatch.setenv("LEKI_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(config), "--no-records", "--seed", "4", "--trials", "1"]) == 0
    assert (tmp_path / "env" / "linear_trials.csv").exists()
    assert not list((tmp_path / "env").glob("linear_d3_*"))


def test_aggregate(config, tmp_path, capsys):
    out = tmp_path / "out"
    main(["run", str(config), "--out", str(out), "--no-records"])
    capsys.readouterr()
    assert main(["aggregate", str(out / "linear_trials.csv"), "--metric", "rmse"]) == 0
    text = capsys.readouterr().out.splitlines()
    assert text[0].startswith("experiment,dim") and len(text) == 3
    assert main(["aggregate", str(out / "linear_trials.csv"), "--out", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").exists()


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text('experiment = "quantum"\n')
    assert main(["run", str(p), "--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert main(["run", "--out", str(tmp_path)]) == 2
    assert main(["aggregate", str(tmp_path / "missing.csv")]) == 2


def test_check_command(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5


def test_module_entry_point(config, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "leki.cli", "run", str(config), "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
