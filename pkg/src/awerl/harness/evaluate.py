"""Evaluation campaigns over full pumping cycles with frozen agents."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..env import Phase, run_cycle, write_trajectory
from ..errors import CycleFailed, DataError
from ..td3 import Td3Agent
from .train import agent_policy

EVAL_SEED_OFFSET = 1_000_003


def file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _row(phase, durations, energies):
    d = float(np.mean(durations)) if durations else 0.0
    e = float(np.mean(energies)) if energies else 0.0
    return {"phase": phase, "duration_s": d, "energy_kwh": e,
            "avg_power_kw": e * 3600.0 / d if d > 0 else 0.0}


def _table(per_phase):
    rows = [_row(p, *per_phase[p]) for p in per_phase if per_phase[p][0]]
    d = sum(r["duration_s"] for r in rows)
    e = sum(r["energy_kwh"] for r in rows)
    rows.append({"phase": "total", "duration_s": d, "energy_kwh": e,
                 "avg_power_kw": e * 3600.0 / d if d > 0 else 0.0})
    return rows


@dataclass
class CycleReport:
    """Per-phase means over evaluation cycles.

    ``rows_all`` averages every episode that entered a phase (crashed ones
    included); ``rows_completed`` uses only cycles that finished. Each row
    holds duration (s), energy (kWh) and average power (kW); the total row
    is the column sum with power recomputed from it.
    """

    n_episodes: int
    rows_all: list
    rows_completed: list
    crash_rate: dict
    entered: dict
    n_completed: int
    outcomes: list = field(default_factory=list)
    checkpoint_hashes: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: getattr(self, k) for k in ("n_episodes", "rows_all", "rows_completed",
                                              "crash_rate", "entered", "n_completed",
                                              "outcomes", "checkpoint_hashes")}

    def format(self):
        lines = []
        for title, rows in (("all episodes", self.rows_all),
                            (f"completed cycles ({self.n_completed})", self.rows_completed)):
            lines.append(f"{title}:")
            lines.append(f"  {'phase':<11}{'duration s':>12}{'energy kWh':>13}{'power kW':>11}")
            for r in rows:
                lines.append(f"  {r['phase']:<11}{r['duration_s']:>12.2f}"
                             f"{r['energy_kwh']:>13.4f}{r['avg_power_kw']:>11.2f}")
        lines.append("crash rate: " + ", ".join(
            f"{p} {self.crash_rate[p]:.1%} of {self.entered[p]}" for p in self.crash_rate))
        return "\n".join(lines)


def load_agents(ckpt_dir):
    """Frozen agents from ``<phase>.ckpt`` files in ``ckpt_dir``."""
    return {p: Td3Agent.load(Path(ckpt_dir) / f"{p.value}.ckpt") for p in Phase}


def evaluate(ckpt_dir, cfg, n_episodes, *, wind_spec=None, out_dir=None, agents=None):
    """Fly ``n_episodes`` full cycles with exploration off."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    ckpt_dir = Path(ckpt_dir)
    paths = {p.value: ckpt_dir / f"{p.value}.ckpt" for p in Phase}
    before = {k: file_hash(v) for k, v in paths.items()}
    if agents is None:
        agents = load_agents(ckpt_dir)
    wind = cfg.build_wind(wind_spec)
    polar = cfg.build_polar()
    policies = {p: agent_policy(a) for p, a in agents.items()}
    configs = {p: cfg.phase_config(p) for p in Phase}
    out_dir = Path(out_dir) if out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    all_ = {p.value: ([], []) for p in Phase}
    done = {p.value: ([], []) for p in Phase}
    entered = {p.value: 0 for p in Phase}
    crashed = {p.value: 0 for p in Phase}
    outcomes = []
    n_completed = 0
    for i in range(n_episodes):
        try:
            ledger, traj = run_cycle(policies, wind, cfg.seed + EVAL_SEED_OFFSET + i,
                                     params=cfg.params, polar=polar, thresholds=cfg.thresholds,
                                     configs=configs)
            outcome = "completed"
            n_completed += 1
        except CycleFailed as exc:
            ledger, traj = exc.ledger, exc.trajectory
            outcome = f"{exc.phase}:{exc.reason}"
        outcomes.append(outcome)
        for phase, rec in ledger.phases.items():
            entered[phase.value] += 1
            crashed[phase.value] += bool(rec.status.crashed)
            all_[phase.value][0].append(rec.duration_s)
            all_[phase.value][1].append(rec.energy_kwh)
            if outcome == "completed":
                done[phase.value][0].append(rec.duration_s)
                done[phase.value][1].append(rec.energy_kwh)
        if out_dir:
            write_trajectory(traj, out_dir / f"episode_{i:04d}.csv")

    after = {k: file_hash(v) for k, v in paths.items()}
    if after != before:
        raise DataError("checkpoint files changed during evaluation")
    report = CycleReport(
        n_episodes=n_episodes,
        rows_all=_table(all_),
        rows_completed=_table(done),
        crash_rate={p: crashed[p] / entered[p] if entered[p] else 0.0 for p in entered},
        entered=entered,
        n_completed=n_completed,
        outcomes=outcomes,
        checkpoint_hashes=before,
    )
    if out_dir:
        (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        (out_dir / "report.txt").write_text(report.format() + "\n")
    return report
