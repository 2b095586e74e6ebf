import json
import math
import subprocess
import sys

import numpy as np
import pytest

from awerl import cli
from awerl.env import Phase, obs_dim, read_trajectory, run_cycle
from awerl.errors import ConfigError, CycleFailed, DataError
from awerl.harness import config as C
from awerl.harness.evaluate import evaluate, file_hash, load_agents
from awerl.harness.simulate import simulate
from awerl.harness.train import agent_policy, metrics_path, read_metrics, train
from awerl.td3 import Td3Agent

TINY_TD3 = {"hidden": [16, 12], "batch_size": 8, "buffer_size": 2000, "warmup_steps": 40}


def tiny_config(out, **extra):
    d = {
        "seed": 3,
        "output_dir": str(out),
        "wind": {"kind": "constant", "speed": 5.0},
        "thresholds": {"r_traction_end": 20.3, "r_dot_thr": 50.0, "r_thr": 20.0,
                       "theta_goal": 0.001, "r_r2t_goal": 1.5},
        "phases": {"traction": {"horizon": 40}, "t2r": {"horizon": 20},
                   "retraction": {"horizon": 60, "motor_force": 3000.0},
                   "r2t": {"horizon": 10}},
        "td3": {p: dict(TINY_TD3, episodes=4) for p in C.PHASES},
        "entry_retries": 20,
        "checkpoint_every": 2,
    }
    d.update(extra)
    return d


def write_cfg(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


# config -------------------------------------------------------------------------

def test_defaults():
    cfg = C.load_config()
    assert cfg.seed == 0 and cfg.wind == {"kind": "constant", "speed": 10.0}
    assert [cfg.td3_config(p).episodes for p in C.PHASES] == [1600, 3000, 90000, 20000]
    assert [cfg.phase_config(p).horizon for p in C.PHASES] == [3000, 1500, 3000, 1500]
    assert cfg.params.k_fric == 20.0


def test_config_errors(tmp_path):
    for bad in ({"sed": 1}, {"params": {"mass": 1}}, {"td3": {"tracton": {}}},
                {"wind": {"kind": "storm"}}, {"wind": {"kind": "gridded", "path": "nope.awew"}},
                {"thresholds": {"r_thr": 500.0}}, {"seed": -1}, {"td3": {"t2r": {"gamma": 2}}}):
        with pytest.raises(ConfigError):
            C.config_from_dict(bad)
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        C.load_config(p)
    with pytest.raises(ConfigError):
        C.load_config(tmp_path / "missing.json")


def test_seed_override_and_paths(tmp_path, monkeypatch):
    p = write_cfg(tmp_path, {"seed": 5, "output_dir": "rel"})
    assert C.load_config(p).seed == 5
    assert C.load_config(p).output_dir == str(tmp_path / "rel")
    monkeypatch.setenv("AWE_SEED", "77")
    assert C.load_config(p).seed == 77
    monkeypatch.setenv("AWE_SEED", "x")
    with pytest.raises(ConfigError):
        C.load_config(p)


def test_config_roundtrip(tmp_path):
    cfg = C.config_from_dict(tiny_config(tmp_path / "o"))
    again = C.config_from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


# training -----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    base = tmp_path_factory.mktemp("train")
    cfg = C.config_from_dict(tiny_config(base / "out"))
    paths = train(cfg)
    return cfg, paths


def test_train_writes_checkpoints_and_metrics(trained):
    cfg, paths = trained
    assert sorted(paths) == sorted(C.PHASES)
    for phase in Phase:
        agent = Td3Agent.load(paths[phase.value])
        assert agent.phase == phase.value and agent.obs_dim == obs_dim(phase)
        rows = read_metrics(metrics_path(cfg.output_dir, phase))
        assert len(rows) == 4 and rows[0]["phase"] == phase.value
        assert all(math.isfinite(float(r["return"])) for r in rows)
        assert (paths[phase.value].with_suffix(".last.ckpt")).exists()


def test_train_deterministic(trained, tmp_path):
    cfg, paths = trained
    d = cfg.to_dict()
    d["output_dir"] = str(tmp_path / "again")
    cfg2 = C.config_from_dict(d)
    paths2 = train(cfg2, ["traction", "t2r"])
    for p in ("traction", "t2r"):
        assert file_hash(paths[p]) == file_hash(paths2[p])
        assert (metrics_path(cfg.output_dir, p).read_text()
                == metrics_path(cfg2.output_dir, p).read_text())


def test_resume_and_missing_predecessor(trained, tmp_path):
    cfg, paths = trained
    before = {p: file_hash(v) for p, v in paths.items()}
    again = train(cfg, resume=True)
    assert {p: file_hash(v) for p, v in again.items()} == before
    d = cfg.to_dict()
    d["output_dir"] = str(tmp_path / "empty")
    with pytest.raises(FileNotFoundError):
        train(C.config_from_dict(d), ["retraction"])


# evaluation -------------------------------------------------------------------------------

def test_evaluate_single_episode_matches_ledger(trained, tmp_path):
    cfg, paths = trained
    ckpt = paths["traction"].parent
    before = {p: file_hash(v) for p, v in paths.items()}
    report = evaluate(ckpt, cfg, 1, out_dir=tmp_path / "ev")
    assert {p: file_hash(v) for p, v in paths.items()} == before == report.checkpoint_hashes
    agents = load_agents(ckpt)
    try:
        ledger, _ = run_cycle({p: agent_policy(a) for p, a in agents.items()}, cfg.build_wind(),
                              cfg.seed + 1_000_003, params=cfg.params, thresholds=cfg.thresholds,
                              configs={p: cfg.phase_config(p) for p in Phase})
    except CycleFailed as exc:
        ledger = exc.ledger
    by_phase = {r["phase"]: r for r in report.rows_all}
    for phase, rec in ledger.phases.items():
        assert by_phase[phase.value]["energy_kwh"] == rec.energy_kwh
        assert by_phase[phase.value]["duration_s"] == rec.duration_s
    total = report.rows_all[-1]
    assert total["phase"] == "total"
    assert total["energy_kwh"] == pytest.approx(sum(r["energy_kwh"] for r in report.rows_all[:-1]),
                                                rel=1e-12)
    assert total["avg_power_kw"] == pytest.approx(
        total["energy_kwh"] * 3600 / total["duration_s"], rel=1e-12)
    assert (tmp_path / "ev" / "episode_0000.csv").exists()
    assert json.loads((tmp_path / "ev" / "report.json").read_text())["n_episodes"] == 1


def test_evaluate_report_arithmetic(trained):
    cfg, paths = trained
    report = evaluate(paths["traction"].parent, cfg, 3)
    assert len(report.outcomes) == 3
    for p in C.PHASES:
        assert 0.0 <= report.crash_rate[p] <= 1.0
    assert report.entered["traction"] == 3
    for row in report.rows_all:
        if row["duration_s"] > 0:
            assert row["avg_power_kw"] == pytest.approx(row["energy_kwh"] * 3600 / row["duration_s"])
    assert "crash rate" in report.format()


def test_evaluate_same_files_across_winds(trained):
    cfg, paths = trained
    ckpt = paths["traction"].parent
    a = evaluate(ckpt, cfg, 1)
    b = evaluate(ckpt, cfg, 1, wind_spec={"kind": "synthetic", "seed": 2, "n_modes": 4})
    assert a.checkpoint_hashes == b.checkpoint_hashes


# simulation ---------------------------------------------------------------------------------

SIM_INITIAL = {"theta": 0.9, "phi": 0.1, "r": 40.0, "alpha": 8.0, "psi": -2.0}


def test_simulate_zero_action_deterministic():
    cfg = C.load_config()
    script = {"phase": "traction", "initial": SIM_INITIAL, "steps": 50, "action": [0, 0]}
    a, b = simulate(script, cfg), simulate(script, cfg)
    assert a.trajectory == b.trajectory and len(a.trajectory) > 1
    assert not a.clamped
    assert all(r["alpha_deg"] == 8.0 for r in a.trajectory)


def test_simulate_replay_bit_exact(tmp_path):
    cfg = C.load_config()
    rng = np.random.default_rng(4)
    script = {"phase": "traction", "seed": 9, "actions": rng.uniform(-1, 1, (60, 2)).tolist()}
    first = simulate(script, cfg)
    traj, log = first.write(tmp_path, "run")
    replay = {"phase": "traction", "seed": 9,
              "actions": json.loads(log.read_text())["actions"]}
    second = simulate(replay, cfg)
    second.write(tmp_path, "replay")
    assert traj.read_bytes() == (tmp_path / "replay.csv").read_bytes()


def test_simulate_clamps_and_flags():
    cfg = C.load_config()
    script = {"phase": "traction", "initial": SIM_INITIAL,
              "actions": [[0.5, 0.0], [3.0, 0.0], [0.0, -9.0], [0.0, 0.0]]}
    res = simulate(script, cfg)
    assert res.clamped == [2, 3]
    assert res.actions[1] == [1.0, 0.0] and res.actions[2] == [0.0, -1.0]
    script = {"phase": "traction", "initial": SIM_INITIAL, "controls": [[8.5, -2.0], [40.0, -2.0]]}
    res = simulate(script, cfg)
    assert res.clamped == [2]
    with pytest.raises(ConfigError):
        simulate({"phase": "t2r", "steps": 3}, cfg)
    with pytest.raises(ConfigError):
        simulate({"phase": "warp"}, cfg)


# plotting -------------------------------------------------------------------------------------

def test_plot(tmp_path):
    from awerl.harness.plot import plot
    cfg = C.load_config()
    res = simulate({"phase": "traction", "initial": SIM_INITIAL, "steps": 1}, cfg)
    traj, _ = res.write(tmp_path, "one")
    assert len(read_trajectory(traj)) == 2
    outs = plot([traj], tmp_path / "a")
    again = plot([traj], tmp_path / "b")
    assert len(outs) == 3
    for x, y in zip(outs, again):
        assert x.read_bytes() == y.read_bytes()
        assert x.read_bytes().lstrip().startswith(b"<?xml")
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataError):
        plot([empty], tmp_path / "c")


# command line ---------------------------------------------------------------------------------

def test_cli_exit_codes(tmp_path, trained, capsys):
    bad = write_cfg(tmp_path, {"bogus": 1}, "bad.json")
    assert cli.main(["train", "--config", str(bad)]) == 2
    assert cli.main(["evaluate", "--checkpoints", str(tmp_path / "none"), "--episodes", "1",
                     "--out", str(tmp_path / "e")]) == 2
    script = tmp_path / "s.json"
    script.write_text(json.dumps({"phase": "traction", "initial": SIM_INITIAL, "steps": 5}))
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--script", str(script), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest_simulate.json").read_text())
    assert manifest["seed"] == 0 and manifest["build"]["kernel"]
    assert cli.main(["plot", str(out / "s.csv"), "--out", str(tmp_path / "svg")]) == 0
    cfg, paths = trained
    good = write_cfg(tmp_path, cfg.to_dict(), "good.json")
    assert cli.main(["evaluate", "--config", str(good), "--checkpoints",
                     str(paths["traction"].parent), "--episodes", "1", "--wind", "[1]",
                     "--out", str(tmp_path / "e2")]) == 2
    assert cli.main(["evaluate", "--config", str(good), "--checkpoints",
                     str(paths["traction"].parent), "--episodes", "1",
                     "--out", str(tmp_path / "e3")]) == 0


def test_cli_numerical_failure(tmp_path, monkeypatch):
    from awerl.errors import NumericalDivergence
    T = sys.modules["awerl.harness.train"]

    def diverge(*a, **k):
        raise NumericalDivergence("non-finite critic loss")
    monkeypatch.setattr(T, "train", diverge)
    p = write_cfg(tmp_path, tiny_config(tmp_path / "o"))
    assert cli.main(["train", "--config", str(p), "--phase", "traction"]) == 3


def test_cli_entry_point():
    out = subprocess.run([sys.executable, "-m", "awerl.cli", "--help"], capture_output=True,
                         text=True, check=True)
    assert "train" in out.stdout and "evaluate" in out.stdout
