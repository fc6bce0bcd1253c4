import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from catsim.cli import main
from catsim.config import ConfigError, load_config, parse_config
from catsim.harness import ScanKind, load_result

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
KHZ = 2 * math.pi * 1e3


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


SMALL_TIME = """
[run]
seed = 1
[trap]
nbar = 2
nbar_dot_per_ms = 0
[force]
omega_sb_khz = 2
delta_khz = 5
[scan]
kind = timescan
start_us = 0
stop_us = 200
points = 21
shots = 50
"""


def test_units_converted():
    cfg = parse_config(SMALL_TIME + "[drift]\nkind = sinusoid\namplitude_rad = 1\nfrequency_hz = 2\n")
    assert cfg.force.omega_sb == pytest.approx(2 * KHZ)
    assert cfg.scan.stop == pytest.approx(200e-6)
    assert cfg.scan.setup.drift.frequency == 2
    assert cfg.trap.nbar_dot == 0


def test_shipped_configs_parse():
    for name in ("thermal_timescan", "cold_freqscan", "hot_freqscan", "echo_copropagating", "echo_counterpropagating"):
        cfg = load_config(CONFIGS / f"{name}.cfg")
        assert cfg.scan is not None
    assert load_config(CONFIGS / "cold_freqscan.cfg").scan.kind is ScanKind.DETUNING


@pytest.mark.parametrize(
    "text",
    [
        SMALL_TIME + "[trap]\nomega_z_hz = 1\n",
        SMALL_TIME.replace("stop_us", "stop_khz"),
        SMALL_TIME + "[bogus]\n",
        SMALL_TIME + "[drift]\nkind = constant\ndiffusion_rad2_per_s = 3\n",
        SMALL_TIME.replace("points = 21", "points = many"),
        SMALL_TIME.replace("kind = timescan", "kind = spinscan"),
        SMALL_TIME + "[beam]\ngeometry = sideways\n",
        SMALL_TIME.replace("shots = 50", "shots = -3"),
        "[oracle]\ndelta_khz = 0, 2\n",
        "[fit]\nnbar_bounds = 3\n",
        "not an ini file",
    ],
)
def test_strict_rejection(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_overrides():
    cfg = parse_config(SMALL_TIME).with_overrides(seed=9, shots=0, engine="oracle")
    assert cfg.scan.seed == 9 and cfg.scan.shots == 0 and cfg.scan.engine == "oracle"
    with pytest.raises(ConfigError):
        parse_config("[trap]\nnbar = 1\n").with_overrides(shots=3)


def test_timescan_outputs(tmp_path):
    cfg = write(tmp_path, SMALL_TIME)
    out = tmp_path / "out"
    assert main(["timescan", "--config", str(cfg), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["timescan_1.csv", "timescan_1.json", "timescan_1.svg"]
    assert (out / "timescan_1.svg").read_text().startswith("<svg")
    assert len((out / "timescan_1.csv").read_text().splitlines()) == 22


def test_shots_zero_is_model(tmp_path):
    cfg = write(tmp_path, SMALL_TIME)
    assert main(["timescan", "--config", str(cfg), "--out", str(tmp_path), "--shots", "0", "--seed", "4"]) == 0
    r = load_result(tmp_path / "timescan_4.json")
    assert np.array_equal(r.estimate, r.model)


def test_missing_config_no_outputs(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["freqscan", "--config", str(tmp_path / "missing.cfg"), "--out", str(out)]) == 1
    assert not out.exists()
    assert "missing.cfg" in capsys.readouterr().err


def test_wrong_subcommand_for_kind(tmp_path):
    cfg = write(tmp_path, SMALL_TIME)
    out = tmp_path / "o"
    assert main(["phasescan", "--config", str(cfg), "--out", str(out)]) == 1
    assert not out.exists()


def test_numerical_failure_exit_2(tmp_path, capsys):
    text = SMALL_TIME.replace("kind = timescan", "kind = detuningscan")
    text = text.replace("start_us = 0", "start_khz = -1").replace("stop_us = 200", "stop_khz = 1")
    text = text.replace("points = 21", "points = 3\nsmoothing = 1").replace("delta_khz = 5", "tau_us = 100")
    cfg = write(tmp_path, text)
    out = tmp_path / "o"
    # the middle point sits on resonance, where the closed form is undefined
    assert main(["freqscan", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    assert "scan point 1" in capsys.readouterr().err


def test_freqscan_cold_envelope(tmp_path):
    out = tmp_path / "f3"
    assert main(["freqscan", "--config", str(CONFIGS / "cold_freqscan.cfg"), "--out", str(out)]) == 0
    r = load_result(out / "detuningscan_3.json")
    assert {p.suffix for p in out.iterdir()} == {".csv", ".json", ".svg"}
    centre = np.abs(r.swept) < 2 * KHZ
    assert r.model[centre].mean() > r.model[~centre].mean()


ORACLE_PURE = """
[trap]
nbar = 0
nbar_dot_per_ms = 0
[force]
omega_sb_khz = 2.2
[oracle]
delta_khz = 5.46, -2
tau_us = 60, 120
gate = 1e-6
"""


def test_compare_oracle_pure(tmp_path, capsys):
    cfg = write(tmp_path, ORACLE_PURE)
    assert main(["compare-oracle", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "compare_0.json").read_text())
    assert summary["passed"] and summary["max_abs_diff"] <= 1e-6
    assert "max |dP|" in capsys.readouterr().out


def test_compare_oracle_gate_failure(tmp_path):
    text = """
[trap]
nbar = 0
nbar_dot_per_ms = 2
[force]
omega_sb_khz = 2
[oracle]
delta_khz = 5
tau_us = 100
gate = 1e-12
"""
    cfg = write(tmp_path, text)
    assert main(["compare-oracle", "--config", str(cfg), "--out", str(tmp_path)]) != 0


def test_fit_round_trip_cold(tmp_path):
    assert main(["freqscan", "--config", str(CONFIGS / "cold_freqscan.cfg"), "--out", str(tmp_path), "--shots", "0"]) == 0
    rc = main(["fit", str(tmp_path / "detuningscan_3.csv"), "--config", str(CONFIGS / "fit_cold_freqscan.cfg"), "--out", str(tmp_path)])
    assert rc == 0
    res = json.loads((tmp_path / "detuningscan_3_fit.json").read_text())
    assert res["values"]["omega_sb"] == pytest.approx(1.62 * KHZ, rel=1e-3)


def test_fit_malformed_csv(tmp_path):
    bad = tmp_path / "timescan_0.csv"
    bad.write_text("swept,model,estimate,smoothed,drift\n1,2\n")
    assert main(["fit", str(bad), "--config", str(CONFIGS / "fit_thermal_timescan.cfg"), "--out", str(tmp_path)]) == 1


def test_fit_all_fixed(tmp_path, capsys):
    cfg = write(tmp_path, SMALL_TIME)
    assert main(["timescan", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    fit_cfg = write(tmp_path, "[fit]\nmodel = timescan\nnbar = 2\nomega_sb_khz = 2\ndelta_khz = 5\nnbar_dot_per_ms = 0\n", "fit.cfg")
    assert main(["fit", str(tmp_path / "timescan_1.json"), "--config", str(fit_cfg), "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "timescan_1_fit.json").read_text())
    assert res["iterations"] == 0 and res["free"] == []
    assert "residual norm" in capsys.readouterr().out


def test_fit_nonconvergence_exit_3(tmp_path):
    cfg = write(tmp_path, SMALL_TIME)
    assert main(["timescan", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    fit_cfg = write(tmp_path, "[fit]\nfree = delta, nbar\nmax_iter = 1\ndelta_khz = 4\nnbar = 3\n", "fit.cfg")
    rc = main(["fit", str(tmp_path / "timescan_1.json"), "--config", str(fit_cfg), "--out", str(tmp_path)])
    assert rc == 3
    assert json.loads((tmp_path / "timescan_1_fit.json").read_text())["converged"] is False


def test_entry_points(tmp_path):
    cfg = write(tmp_path, SMALL_TIME)
    r = subprocess.run([sys.executable, "-m", "catsim", "timescan", "--config", str(cfg), "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "catsim", "timescan"], capture_output=True, text=True)
    assert r.returncode != 0
