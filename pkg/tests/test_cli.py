import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from holab import scenarios as sc
from holab.cli import main
from holab.errors import ConfigError


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_list_names_every_scenario(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in sc.CATALOG:
        assert name in out
    assert main(["list", "--json"]) == 0
    cat = json.loads(capsys.readouterr().out)
    assert {c["name"] for c in cat} == set(sc.CATALOG)
    assert "hofstadter-chern" in sc.CATALOG


def test_unknown_key_is_usage_error(tmp_path, capsys):
    cfg = _write(tmp_path, 'scenario = "foucault"\n[parameters]\nalpha = 0.5\nbogus = 1\n')
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 64
    assert "bogus" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        sc.validate_config({"scenario": "nope"})
    with pytest.raises(ConfigError):
        sc.validate_config({"scenario": "foucault", "extra": 1})


def test_bad_arguments_exit_64(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["run"])
    assert ei.value.code == 64


def test_run_is_byte_stable(tmp_path):
    cfg = _write(tmp_path, 'scenario = "hofstadter-chern"\nseed = 3\n[parameters]\nsweep_q_max = 3\n')
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a)]) == 0
    assert main(["run", "--config", cfg, "--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "bands.csv").read_bytes() == (b / "bands.csv").read_bytes()
    assert json.loads((a / "timing.json").read_text())["wall_time_s"] >= 0


def test_report_round_trip_and_csv(tmp_path):
    cfg = _write(tmp_path, 'scenario = "pseudorotation-levels"\n')
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out), "--format", "json,csv"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["pass"] is True and rep["scenario"] == "pseudorotation-levels"
    assert sc.report_json(rep) == (out / "report.json").read_text()
    with open(out / "levels.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["j", "m", "k", "energy", "energy_float"]
    assert len(rows) == 1 + rep["results"]["levels"]["value"]


def test_json_config_and_seed_override(tmp_path):
    cfg = _write(tmp_path, json.dumps({"scenario": "pancharatnam-triangle"}), "cfg.json")
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out), "--seed", "5", "--format", "json"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["inputs"]["seed"] == 5
    assert rep["results"]["phase"]["value"] == pytest.approx(-np.pi / 4, abs=1e-6)
    assert not list(out.glob("*.csv"))


def test_failed_expectation_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, 'scenario = "foucault"\n[tolerances]\nrelative = 1e-14\n')
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "FAIL foucault.precession" in capsys.readouterr().out


def test_runtime_error_exit_1(tmp_path, capsys):
    cfg = _write(tmp_path, f'scenario = "bead"\n[parameters]\ncurve = "file"\nfile = "{tmp_path / "missing.csv"}"\n')
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "DomainError" in capsys.readouterr().err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "holab.cli", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "tycko" in r.stdout
