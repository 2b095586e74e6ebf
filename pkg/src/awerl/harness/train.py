"""Sequential four-phase training.

Traction is trained from random starts. Every later phase draws its entry
states by flying the frozen, already trained agents of the preceding phases
(exploration off); failed prefixes are retried with a fresh seed.
"""
from __future__ import annotations

import csv
import math
from collections import deque
from pathlib import Path

import numpy as np

from ..env import AweEnv, Phase, obs_dim, run_episode
from ..errors import AweError
from ..td3 import Td3Agent, Transition

METRIC_FIELDS = ["phase", "episode", "steps", "return", "status", "energy_kwh", "duration_s",
                 "critic_loss", "roll_return", "roll_crash_rate", "roll_energy_kwh"]
ROLLING = 100


class EntryStateUnavailable(AweError):
    """The frozen earlier agents never delivered the kite to this phase."""


def checkpoint_path(out_dir, phase):
    return Path(out_dir) / "checkpoints" / f"{Phase(phase).value}.ckpt"


def metrics_path(out_dir, phase):
    return Path(out_dir) / f"metrics_{Phase(phase).value}.csv"


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def phase_seed(master, phase):
    return [int(master), list(Phase).index(Phase(phase))]


def agent_policy(agent):
    return lambda obs: agent.act(obs.vector(), explore=False)


class EntrySampler:
    """Produces entry hand-offs for ``phase`` using frozen predecessor agents."""

    def __init__(self, phase, agents, cfg, wind, polar, rng):
        self.phase = Phase(phase)
        self.agents = agents
        self.cfg = cfg
        self.wind = wind
        self.polar = polar
        self.rng = rng
        self.attempts = 0
        self.failures = 0

    def sample(self):
        if self.phase is Phase.TRACTION:
            return None, int(self.rng.integers(2 ** 31))
        chain = list(Phase)[:list(Phase).index(self.phase)]
        for _ in range(self.cfg.entry_retries):
            seed = int(self.rng.integers(2 ** 31))
            self.attempts += 1
            inherited = None
            ok = True
            for p in chain:
                env = _make_env(p, self.cfg, self.wind, self.polar)
                if p is Phase.R2T:
                    break
                record, _, _ = run_episode(env, agent_policy(self.agents[p]), seed=seed,
                                           inherited=inherited)
                if record.status.kind != "Goal":
                    ok = False
                    break
                inherited = env.handoff
            if ok:
                if self.phase is Phase.R2T:
                    probe = _make_env(Phase.R2T, self.cfg, self.wind, self.polar)
                    probe.state = inherited.state
                    if probe.well_positioned:
                        # no R2T needed from here; draw another entry
                        self.failures += 1
                        continue
                return inherited, seed
            self.failures += 1
        raise EntryStateUnavailable(
            f"no successful entry into {self.phase.value} after {self.cfg.entry_retries} attempts")


def _make_env(phase, cfg, wind, polar):
    return AweEnv(phase, wind, params=cfg.params, polar=polar, thresholds=cfg.thresholds,
                  config=cfg.phase_config(phase))


def train_phase(phase, cfg, agents, *, wind=None, log_rows=None, progress=None):
    """Train one phase agent; returns it. ``agents`` holds frozen predecessors."""
    phase = Phase(phase)
    tcfg = cfg.td3_config(phase)
    wind = wind if wind is not None else cfg.build_wind()
    polar = cfg.build_polar()
    out_dir = Path(cfg.output_dir)
    ckpt = checkpoint_path(out_dir, phase)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    last_good = ckpt.with_suffix(".last.ckpt")

    agent = Td3Agent(obs_dim(phase), 2, tcfg, seed=phase_seed(cfg.seed, phase) + [1],
                     phase=phase.value)
    sampler = EntrySampler(phase, agents, cfg, wind, polar,
                           np.random.default_rng(phase_seed(cfg.seed, phase) + [2]))
    env = _make_env(phase, cfg, wind, polar)
    window = deque(maxlen=ROLLING)
    rows = [] if log_rows is None else log_rows
    for ep in range(tcfg.episodes):
        inherited, seed = sampler.sample()
        obs = env.reset(seed=seed, inherited=inherited)
        vec = obs.vector()
        total, losses = 0.0, []
        while True:
            action = agent.explore_action(vec)
            obs, reward, status, _ = env.step(action)
            nvec = obs.vector()
            # horizon exhaustion is a time limit, not a terminal state
            done = status.kind == "Goal" or status.crashed
            res = agent.observe(Transition(vec, action, reward, nvec, done))
            if res is not None:
                losses.append(res.critic1 + res.critic2)
            total += reward
            vec = nvec
            if status.terminal:
                break
        rec = env.record
        window.append((total, status.crashed, rec.energy_kwh))
        row = {
            "phase": phase.value, "episode": ep, "steps": rec.steps, "return": total,
            "status": str(status), "energy_kwh": rec.energy_kwh, "duration_s": rec.duration_s,
            "critic_loss": float(np.mean(losses)) if losses else math.nan,
            "roll_return": float(np.mean([w[0] for w in window])),
            "roll_crash_rate": float(np.mean([w[1] for w in window])),
            "roll_energy_kwh": float(np.mean([w[2] for w in window])),
        }
        rows.append(row)
        if progress is not None:
            progress(row)
        if (ep + 1) % cfg.checkpoint_every == 0:
            agent.save(last_good)
    agent.save(ckpt)
    return agent


def write_metrics(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})


def read_metrics(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def train(cfg, phases=None, *, resume=False, progress=None):
    """Train ``phases`` (default all four) in order; returns checkpoint paths.

    With ``resume`` a phase whose final checkpoint exists is loaded instead
    of retrained. Predecessor agents must have checkpoints on disk.
    """
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wind = cfg.build_wind()
    wanted = [Phase(p) for p in (phases or list(Phase))]
    agents, paths = {}, {}
    for phase in Phase:
        path = checkpoint_path(out_dir, phase)
        if phase not in wanted or (resume and path.exists()):
            if phase in wanted or phase.value in _needed_by(wanted):
                if not path.exists():
                    raise FileNotFoundError(f"missing checkpoint for {phase.value}: {path}")
                agents[phase] = Td3Agent.load(path)
                paths[phase.value] = path
            continue
        rows = []
        try:
            agents[phase] = train_phase(phase, cfg, agents, wind=wind, log_rows=rows,
                                        progress=progress)
        finally:
            write_metrics(rows, metrics_path(out_dir, phase))
        paths[phase.value] = path
    return paths


def _needed_by(wanted):
    last = max(list(Phase).index(p) for p in wanted)
    return {p.value for p in list(Phase)[:last]}
