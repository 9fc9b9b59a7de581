from __future__ import annotations

import json
import math
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from volterra_lab.cli import main
from volterra_lab.config import ExperimentConfig, config_hash, dumps_config, loads_config, resolve
from volterra_lab.errors import ConfigError
from volterra_lab.experiments import run_experiment

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL_SI = """
command = "selfinteract"
name = "si"
seed = 3
[grid]
n_steps = 32
[spectral]
xi_max = 10.0
spacing = 0.1
[drift]
preset = "gaussian"
amplitude = 2.0
[output]
figures = false
"""


def test_defaults_and_round_trip():
    cfg = resolve({"command": "regularity"})
    assert cfg["name"] == "regularity" and cfg["regularity"]["zeta"] == math.inf
    again = loads_config(dumps_config(cfg))
    assert again == cfg and config_hash(again) == config_hash(cfg)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 5000), H=st.floats(0.01, 0.99), T=st.floats(1e-3, 10.0))
def test_round_trip_property(seed, n, H, T):
    cfg = resolve({"command": "simulate", "seed": seed, "grid": {"n_steps": n, "horizon_T": T},
                   "process": {"kind": "fbm", "H": H}})
    assert loads_config(dumps_config(cfg)) == cfg


def test_hash_ignores_runtime_fields():
    a = resolve({"command": "simulate"})
    b = resolve({"command": "simulate", "threads": 4, "output": {"dir": "x", "figures": False}})
    c = resolve({"command": "simulate", "seed": 1})
    assert config_hash(a) == config_hash(b) != config_hash(c)


@pytest.mark.parametrize("raw, where", [
    ({"command": "nope"}, "command"),
    ({"command": "simulate", "grid": {"n_steps": "many"}}, "grid.n_steps"),
    ({"command": "simulate", "grid": {"n_steps": 0}}, "grid.n_steps"),
    ({"command": "simulate", "grid": {"bogus": 1}}, "grid.bogus"),
    ({"command": "simulate", "process": {"H": 1.5}}, "process.H"),
    ({"command": "sewing", "sewing": {"levels": [1, 2]}}, "sewing.levels"),
    ({"command": "sweep", "sweep": {"params": {"process.nope": [1]}}}, "sweep.params.process.nope"),
    ({"command": "sweep", "sweep": {"params": {"process.H": [0.2, "x"]}}}, "sweep.params.process.H[1]"),
    ({"command": "sweep", "sweep": {"params": {"threads": [1, 2]}}}, "sweep.params.threads"),
])
def test_invalid_fields_name_their_path(raw, where):
    with pytest.raises(ConfigError, match=r"^\[config\] " + where.replace(".", r"\.").replace("[", r"\[")):
        resolve(raw)


def test_overrides():
    cfg = ExperimentConfig.from_dict({"command": "regularity"}).with_overrides({"process.H": 0.3, "seed": 9})
    assert cfg.data["process"]["H"] == 0.3 and cfg.data["seed"] == 9
    with pytest.raises(ConfigError):
        cfg.with_overrides({"process.H": 2.0})


def test_example_configs_resolve():
    files = sorted(CONFIGS.glob("*.toml"))
    assert files
    for f in files:
        ExperimentConfig.from_file(f)


def _csvs(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


def test_cli_run_is_reproducible(tmp_path):
    cfg = tmp_path / "si.toml"
    cfg.write_text(SMALL_SI)
    assert main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    a, b = _csvs(tmp_path / "a" / "si"), _csvs(tmp_path / "b" / "si")
    assert a and a == b
    report = json.loads((tmp_path / "a" / "si" / "report.json").read_text())
    assert report["config_hash"] == ExperimentConfig.from_file(cfg).hash
    for name, data in a.items():
        assert data.decode().splitlines()[0].startswith("config_hash,")
    # the written config runs again unchanged
    assert main(["run", str(tmp_path / "a" / "si" / "config.toml"), "--out", str(tmp_path / "c")]) == 0
    assert _csvs(tmp_path / "c" / "si") == a


def test_cli_seed_override_changes_output(tmp_path):
    cfg = tmp_path / "si.toml"
    cfg.write_text(SMALL_SI)
    assert main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "b"), "--seed", "4"]) == 0
    assert _csvs(tmp_path / "a") != _csvs(tmp_path / "b")


def test_cli_invalid_config_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('command = "simulate"\n[grid]\nn_steps = "x"\n')
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2
    assert "grid.n_steps" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.toml")]) == 2
    (tmp_path / "broken.toml").write_text("command = \n")
    assert main(["run", str(tmp_path / "broken.toml")]) == 2


def test_cli_numerical_failure_exit_3(tmp_path, capsys):
    cfg = tmp_path / "si.toml"
    cfg.write_text(SMALL_SI + '[solver]\nstep_tau = 1.0\nmax_iters = 1\n')
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 3
    assert "selfinteract" in capsys.readouterr().err


def test_env_output_root(tmp_path, monkeypatch):
    cfg = tmp_path / "si.toml"
    cfg.write_text(SMALL_SI)
    monkeypatch.setenv("VOLTERRA_LAB_OUT", str(tmp_path / "env"))
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "env" / "si" / "report.json").exists()


def test_sweep_flags_failed_points(tmp_path):
    raw = loads_config(SMALL_SI)
    raw["command"] = "sweep"
    raw["sweep"] = {"command": "selfinteract", "params": {"solver.max_iters": [200, 1]}, "workers": 1}
    raw["solver"]["step_tau"] = 1.0
    out = run_experiment(ExperimentConfig.from_dict(raw), tmp_path)
    assert out.result.summary == {"points": 2, "failed": 1}
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    header = lines[0].split(",")
    status = header.index("status")
    assert lines[1].split(",")[status] == "ok"
    assert lines[2].split(",")[status].startswith("failed")
    assert (tmp_path / "point_000" / "report.json").exists()


def test_empty_sweep_is_single_run(tmp_path):
    raw = loads_config(SMALL_SI)
    raw["command"] = "sweep"
    raw["sweep"] = {"command": "selfinteract", "params": {}, "workers": 1}
    out = run_experiment(ExperimentConfig.from_dict(raw), tmp_path)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["command"] == "selfinteract"
    assert not (tmp_path / "sweep.csv").exists() and out.files


def test_cli_sweep_subcommand(tmp_path):
    cfg = tmp_path / "sw.toml"
    cfg.write_text(SMALL_SI.replace('[output]', '[sweep]\nparams = { "drift.amplitude" = [0.5, 1.0] }\n[output]'))
    assert main(["sweep", str(cfg), "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "si" / "sweep.csv").read_text().splitlines()) == 3
