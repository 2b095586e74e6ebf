"""Scripted (non-learning) rollouts of one phase.

A script is a JSON object::

    {"phase": "traction",
     "seed": 0,                       # random traction start, or
     "initial": {"theta": 1.0, "phi": 0.0, "r": 20.0, "theta_dot": 0.0,
                 "phi_dot": 0.0, "r_dot": 0.0, "alpha": 10.0, "psi": 0.0},
     "steps": 200,
     one of:
       "action": [0.0, 0.0]           # constant increments (deg per step)
       "actions": [[da, dpsi], ...]    # increment log, e.g. an exported one
       "controls": [[alpha, psi], ...] # absolute angle schedule (deg)
    }

Requests outside the admissible increments or angle bounds are clamped and
the step indices are reported in ``clamped``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..dynamics import ALPHA_RANGE, PSI_RANGE, KiteState
from ..env import AweEnv, Handoff, Phase, write_trajectory
from ..errors import ConfigError

_STATE_KEYS = ("theta", "phi", "r", "theta_dot", "phi_dot", "r_dot")


@dataclass
class SimulationResult:
    trajectory: list
    actions: list
    clamped: list = field(default_factory=list)
    status: str = ""

    def write(self, out_dir, stem="simulation"):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        traj = out_dir / f"{stem}.csv"
        write_trajectory(self.trajectory, traj)
        log = out_dir / f"{stem}_actions.json"
        log.write_text(json.dumps({"actions": self.actions, "clamped": self.clamped,
                                   "status": self.status}) + "\n")
        return traj, log


def _within(x, lo, hi):
    return lo <= x <= hi


def load_script(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"script not found: {path}") from e
    except ValueError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e


def simulate(script, cfg, *, wind=None):
    """Run ``script`` (a dict) under ``cfg``; returns a :class:`SimulationResult`."""
    if not isinstance(script, dict):
        raise ConfigError("script must be a JSON object")
    try:
        phase = Phase(script.get("phase", "traction"))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    kinds = [k for k in ("action", "actions", "controls") if k in script]
    if len(kinds) > 1:
        raise ConfigError(f"script may hold only one of action/actions/controls, got {kinds}")
    kind = kinds[0] if kinds else "action"

    wind = wind if wind is not None else cfg.build_wind()
    env = AweEnv(phase, wind, params=cfg.params, polar=cfg.build_polar(),
                 thresholds=cfg.thresholds, config=cfg.phase_config(phase))
    inherited = None
    if "initial" in script:
        ini = script["initial"]
        try:
            state = KiteState(*(float(ini.get(k, 0.0)) for k in _STATE_KEYS))
            inherited = Handoff(state, float(ini["alpha"]), float(ini["psi"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid initial state: {e}") from e
    elif phase is not Phase.TRACTION:
        raise ConfigError(f"a {phase.value} script needs an 'initial' state")
    env.reset(seed=script.get("seed", cfg.seed), inherited=inherited)
    clamped = []
    if inherited is not None and (not _within(inherited.alpha, *ALPHA_RANGE)
                                  or not _within(inherited.psi, *PSI_RANGE)):
        clamped.append(0)

    if kind == "action":
        steps = int(script.get("steps", env.config.horizon))
        seq = [script.get("action", [0.0, 0.0])] * steps
    else:
        seq = script[kind]
        steps = int(script.get("steps", len(seq)))
        seq = seq[:steps]

    actions = []
    status = env.status
    for k, item in enumerate(seq, start=1):
        try:
            a, b = (float(v) for v in item)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"step {k}: expected a pair of numbers, got {item!r}") from e
        flagged = False
        if kind == "controls":
            if not (_within(a, *ALPHA_RANGE) and _within(b, *PSI_RANGE)):
                flagged = True
            a -= env.controls.alpha
            b -= env.controls.psi
        da, db = min(max(a, -1.0), 1.0), min(max(b, -1.0), 1.0)
        if (da, db) != (a, b):
            flagged = True
        before = (env.controls.alpha, env.controls.psi)
        _, _, status, _ = env.step((da, db))
        applied = (env.controls.alpha - before[0], env.controls.psi - before[1])
        if abs(applied[0] - da) > 1e-12 or abs(applied[1] - db) > 1e-12:
            flagged = True
        if flagged:
            clamped.append(k)
        actions.append([da, db])
        if status.terminal:
            break
    return SimulationResult(env.trajectory, actions, clamped, str(status))
