import json
import os

import numpy as np
import pytest

from spdesim.cli import main
from spdesim.config import ConfigError, load_settings, master_seed

BASE_CONFIG = """
[space]
family = sine-dirichlet
n = 8

[coefficients]
fixture = heat_jump
theta = 0.5
lipschitz = 0.1
k1 = 0.1
k2 = 0.1

[noise]
family = unit-interval-power-law
beta = 1.5
master_seed = 4242

[scheme]
kind = explicit
n = 4
m = 32
l = 2
gamma = 0.5
initial = smooth
"""

LADDER_SECTION = """
[run]
paths = 30
workers = 1

[ladder]
rungs = 2:16:1, 4:64:2
reference = 8:256:3
"""


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(BASE_CONFIG)
    return path


@pytest.fixture()
def ladder_config(tmp_path):
    path = tmp_path / "ladder.cfg"
    path.write_text(BASE_CONFIG + LADDER_SECTION)
    return path


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[scheme]\nkindd = explicit\n")
    with pytest.raises(ConfigError, match="kindd"):
        load_settings(path)


def test_env_seed_override(config_file, monkeypatch):
    settings = load_settings(config_file)
    assert master_seed(settings) == 4242
    monkeypatch.setenv("SPDE_SEED", "77")
    assert master_seed(settings) == 77


def test_simulate_writes_trajectory(config_file, tmp_path, capsys):
    out = tmp_path / "traj.json"
    final = tmp_path / "final.csv"
    code = main(
        [
            "simulate",
            "--config",
            str(config_file),
            "--out",
            str(out),
            "--final-csv",
            str(final),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["kind"] == "explicit"
    assert payload["m"] == 32
    assert len(payload["values"]) == 33
    lines = final.read_text().splitlines()
    assert lines[0] == "mode,value"
    assert len(lines) == 5


def test_simulate_deterministic_under_env_seed(config_file, tmp_path, monkeypatch):
    monkeypatch.setenv("SPDE_SEED", "99")
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    main(["simulate", "--config", str(config_file), "--out", str(out1)])
    main(["simulate", "--config", str(config_file), "--out", str(out2)])
    assert out1.read_bytes() == out2.read_bytes()
    monkeypatch.setenv("SPDE_SEED", "100")
    out3 = tmp_path / "c.json"
    main(["simulate", "--config", str(config_file), "--out", str(out3)])
    assert out1.read_bytes() != out3.read_bytes()


def test_check_conditions_exit_codes(tmp_path):
    good = tmp_path / "good.cfg"
    good.write_text(BASE_CONFIG + "[run]\ntrials = 300\n")
    assert main(["check-conditions", "--config", str(good)]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text(
        BASE_CONFIG.replace("theta = 0.5", "theta = 1.2\nlambda_const = 0.375")
        + "[run]\ntrials = 300\n"
    )
    assert main(["check-conditions", "--config", str(bad)]) == 1


def test_check_conditions_output_format(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(BASE_CONFIG + "[run]\ntrials = 200\n")
    main(["check-conditions", "--config", str(cfg)])
    out = capsys.readouterr().out
    for tag in ("C1", "C2", "C3", "C4", "PropBF"):
        assert tag in out


def test_stability_table(config_file, capsys):
    code = main(["stability", "--config", str(config_file)])
    assert code == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "n,m,c_b,rho,in_I_gamma"
    # default grid: 3 n-values x 4 m-values
    assert len(out) == 1 + 12
    first = out[1].split(",")
    assert first[0] == "4" and first[1] == "64"
    # 17 significant digits: c_b(4) = 30 pi^2
    assert first[2] == f"{30 * np.pi**2:.17g}"


def test_console_script_entry_point():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-m", "spdesim.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0
    assert "simulate" in out.stdout and "converge" in out.stdout


def test_converge_reproducible_across_workers(ladder_config, tmp_path):
    out1 = tmp_path / "r1.csv"
    out8 = tmp_path / "r8.csv"
    main(["converge", "--config", str(ladder_config), "--out", str(out1), "--workers", "1"])
    main(["converge", "--config", str(ladder_config), "--out", str(out8), "--workers", "8"])
    assert out1.read_bytes() == out8.read_bytes()
    header = out1.read_text().splitlines()[0]
    assert header == (
        "rung_n,rung_m,rung_l,cb_over_m,est_sq_error,ci_half_width,blowups,seconds"
    )
