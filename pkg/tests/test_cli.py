import csv
import hashlib
import json

import numpy as np
import pytest

from deltadnls.cli import fmt, main, to_json
from deltadnls.config import ConfigError, load_config
from deltadnls.lattice import read_snapshot

MODEL = ["--set", "d=1", "--set", "gamma=1", "--set", "sigma=2", "--set", "v0=0"]

FAST = {
    "modes": ["--set", "d=1", "--set", "v0=1.5,-1.5"],
    "ground-state": ["--mode", "m2", "--nu", "3", "--d", "1", "--gamma", "1", "--sigma", "2", "--v0", "0",
                     "--radius", "20"],
    "threshold-scan": MODEL + ["--set", "nu=1", "--set", "grid=200"],
    "evolve": MODEL + ["--set", "radius=16", "--set", "T=1", "--set", "seed=3"],
    "scatter": MODEL + ["--set", "nu=1", "--set", "p=8", "--set", "radius=60", "--set", "T=20",
                        "--set", "enforce=false"],
    "persist": ["--set", "d=1", "--set", "gamma=-1", "--set", "sigma=1", "--set", "v0=1.5",
                "--set", "eps=0.5"],
}


def run_cli(args, out):
    return main(args + ["--output", str(out), "--quiet"])


def test_modes_row_contains_eta(tmp_path):
    assert run_cli(["modes", "--set", "d=1", "--set", "v0=1.5"], tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "modes.csv")))
    assert list(rows[0]) == ["d", "V0", "branch", "eta", "omega", "mass_unitA", "eig_mismatch"]
    assert float(rows[0]["eta"]) == 0.5
    assert rows[0]["branch"] == "attractive"
    assert float(rows[0]["eig_mismatch"]) < 1e-10


def test_missing_sigma_is_named(tmp_path, capsys):
    code = run_cli(["ground-state", "--omega", "-1", "--d", "1", "--gamma", "1", "--v0", "0"], tmp_path)
    assert code == 2
    assert "sigma" in capsys.readouterr().err
    assert not (tmp_path / "manifest.json").exists()


@pytest.mark.parametrize("sub", sorted(FAST))
def test_repeated_runs_are_byte_identical(sub, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli([sub] + FAST[sub], a) == 0
    assert run_cli([sub] + FAST[sub], b) == 0
    names = sorted(f.name for f in a.iterdir())
    assert names == sorted(f.name for f in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())["artifacts"]
    assert sorted(manifest) == [n for n in names if n != "manifest.json"]
    for n, digest in manifest.items():
        assert hashlib.sha256((a / n).read_bytes()).hexdigest() == digest


def test_ground_state_json_fields(tmp_path):
    assert run_cli(["ground-state"] + FAST["ground-state"], tmp_path) == 0
    doc = json.loads((tmp_path / "ground_state.json").read_text())
    for key in ("omega", "nu", "J", "E", "residual", "eta", "gamma2", "iterations"):
        assert key in doc
    assert doc["found"] is True and doc["E"] < 0


def test_below_threshold_ground_state_reports_diagnostic(tmp_path):
    args = ["ground-state", "--mode", "m2", "--nu", "1.5", "--d", "1", "--gamma", "1", "--sigma", "2",
            "--v0", "0", "--radius", "20"]
    assert run_cli(args, tmp_path) == 0
    doc = json.loads((tmp_path / "ground_state.json").read_text())
    assert doc["found"] is False and "diagnostic" in doc


def test_config_file_sections(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[ground-state]\nd = 1\ngamma = 1\nsigma = 1\nv0 = 0\nomega = -1\nradius = 30\n"
                   "snapshot = true  # keep the profile\n\n[modes]\nd = 1\nv0 = 1.5\n")
    out = tmp_path / "out"
    assert main(["ground-state", "--config", str(cfg), "--output", str(out), "--quiet"]) == 0
    doc = json.loads((out / "ground_state.json").read_text())
    assert doc["J"] == pytest.approx(1.1779829185985164, rel=1e-10)
    with open(out / "profile.snapshot") as fh:
        prof = read_snapshot(fh)
    assert prof.radius == 30
    assert "profile.snapshot" in json.loads((out / "manifest.json").read_text())["artifacts"]


def test_overrides_beat_file(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[modes]\nd = 1\nv0 = 1.5\n")
    out = tmp_path / "out"
    assert main(["modes", "--config", str(cfg), "--set", "v0=3", "--output", str(out), "--quiet"]) == 0
    rows = list(csv.DictReader(open(out / "modes.csv")))
    assert float(rows[0]["V0"]) == 3.0


@pytest.mark.parametrize("text,key", [
    ("[bogus]\nd = 1\n", "bogus"),
    ("[modes]\nd = 1\nv0 = 1\ncolour = red\n", "colour"),
    ("[modes]\nd = one\nv0 = 1\n", "d"),
    ("d = 1\n[modes]\nv0 = 1\n", None),
])
def test_bad_config_files(tmp_path, text, key):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    with pytest.raises(ConfigError) as info:
        load_config("modes", cfg)
    if key is not None:
        assert info.value.key == key
    assert main(["modes", "--config", str(cfg), "--output", str(tmp_path / "o")]) == 2


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config("modes", tmp_path / "missing.ini")


def test_defaults_filled():
    cfg = load_config("evolve", overrides={"d": "1", "gamma": "1", "sigma": "1", "v0": "0"})
    assert cfg["dt"] == 0.01 and cfg["sample_every"] == 10 and cfg["seed"] == 0
    assert str(cfg.output_dir) == "dnls-output"
    with pytest.raises(ConfigError) as info:
        load_config("ground-state", overrides={"d": "1", "gamma": "1", "sigma": "1", "v0": "0", "mode": "m2"})
    assert info.value.key == "nu"


def test_numerical_failure_exits_3(tmp_path, capsys):
    args = ["ground-state", "--omega", "1", "--d", "1", "--gamma", "1", "--sigma", "1", "--v0", "0"]
    assert run_cli(args, tmp_path) == 3
    assert "ParameterError" in capsys.readouterr().err


def test_bad_set_syntax(tmp_path):
    assert run_cli(["modes", "--set", "d"], tmp_path) == 2


def test_float_output_round_trips():
    rng = np.random.default_rng(0)
    for x in rng.standard_normal(100) * 10.0 ** rng.integers(-20, 20, 100):
        assert float(fmt(x)) == x
    assert to_json({"a": float("nan"), "b": [1, True, None]}) .count('"nan"') == 1
    assert json.loads(to_json({"x": 0.1, "y": [1, 2]})) == {"x": 0.1, "y": [1, 2]}


def test_trajectory_columns(tmp_path):
    assert run_cli(["evolve"] + FAST["evolve"], tmp_path) == 0
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,mass,energy,l2,l4,linf,core_fraction"
    fit_dir = tmp_path / "s"
    assert run_cli(["scatter"] + FAST["scatter"], fit_dir) == 0
    fit = json.loads((fit_dir / "fit.json").read_text())
    assert sorted(fit) == ["fitted", "p", "predicted", "r2", "window"]


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "deltadnls", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "threshold-scan" in res.stdout
