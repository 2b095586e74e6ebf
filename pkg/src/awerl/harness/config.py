"""JSON run configuration with full-default fallback.

Schema (every key optional)::

    {
      "seed": 0,
      "output_dir": "runs/default",
      "wind": {"kind": "constant", "speed": 10.0}
            | {"kind": "gridded", "path": "field.awew", "frozen": false, "snapshot": 0}
            | {"kind": "synthetic", "seed": 0, "n_modes": 16, "top_speed": 30.0,
               "height": 100.0, "length": 100.0, "rms_fraction": 0.1},
      "params": {"m": 1.0, "A": 10.0, "rho": 1.2, "M": 10.0, "R": 0.2, "k_fric": 20.0, "g": 9.81},
      "polar": null | "polar.txt",
      "thresholds": {"r_traction_end": 100.0, ...},
      "phases": {"traction": {"horizon": 3000, "gamma": 1.0, "motor_force": 1200.0, "penalty": 100.0}, ...},
      "td3": {"traction": {"episodes": 1600, "actor_lr": 1e-4, ...}, ...},
      "entry_retries": 100,
      "checkpoint_every": 100
    }

Relative paths are resolved against the directory of the config file. The
``AWE_SEED`` environment variable overrides ``seed``.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .. import wind as windmod
from ..dynamics import AeroPolar, SystemParams
from ..env import DEFAULT_PHASE_CONFIGS, Phase, PhaseConfig, Thresholds
from ..errors import ConfigError
from ..td3 import DEFAULT_TD3, Td3Config

PHASES = [p.value for p in Phase]
_WIND_KEYS = {
    "constant": {"speed"},
    "gridded": {"path", "frozen", "snapshot"},
    "synthetic": {"seed", "n_modes", "top_speed", "height", "length", "rms_fraction"},
}
_TOP_KEYS = {"seed", "output_dir", "wind", "params", "polar", "thresholds", "phases", "td3",
             "entry_retries", "checkpoint_every"}


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "runs/default"
    wind: dict = field(default_factory=lambda: {"kind": "constant", "speed": 10.0})
    params: SystemParams = field(default_factory=SystemParams)
    polar: str | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    phases: dict = field(default_factory=lambda: {p.value: c for p, c in DEFAULT_PHASE_CONFIGS.items()})
    td3: dict = field(default_factory=lambda: dict(DEFAULT_TD3))
    entry_retries: int = 100
    checkpoint_every: int = 100

    def phase_config(self, phase):
        return self.phases[Phase(phase).value]

    def td3_config(self, phase):
        return self.td3[Phase(phase).value]

    def build_wind(self, spec=None):
        return build_wind(spec or self.wind)

    def build_polar(self):
        return AeroPolar.load(self.polar) if self.polar else AeroPolar.default()

    def to_dict(self):
        th = dataclasses.asdict(self.thresholds)
        th["phi_goal"] = list(th["phi_goal"])
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "wind": dict(self.wind),
            "params": dataclasses.asdict(self.params),
            "polar": self.polar,
            "thresholds": th,
            "phases": {k: dataclasses.asdict(v) for k, v in self.phases.items()},
            "td3": {k: v.to_dict() for k, v in self.td3.items()},
            "entry_retries": self.entry_retries,
            "checkpoint_every": self.checkpoint_every,
        }


def _merge(cls, base, overrides, what):
    if overrides is None:
        return base
    if not isinstance(overrides, dict):
        raise ConfigError(f"{what} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - names
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        kw = dict(overrides)
        if "phi_goal" in kw:
            kw["phi_goal"] = tuple(kw["phi_goal"])
        return dataclasses.replace(base, **kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {what}: {e}") from e


def _resolve(path, base_dir):
    p = Path(path)
    return str(p if p.is_absolute() else (base_dir / p))


def validate_wind(spec, base_dir=Path(".")):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("wind must be an object with a 'kind'")
    kind = spec["kind"]
    if kind not in _WIND_KEYS:
        raise ConfigError(f"unknown wind kind {kind!r}; expected one of {sorted(_WIND_KEYS)}")
    unknown = set(spec) - _WIND_KEYS[kind] - {"kind"}
    if unknown:
        raise ConfigError(f"unknown wind keys for {kind}: {sorted(unknown)}")
    spec = dict(spec)
    if kind == "gridded":
        if "path" not in spec:
            raise ConfigError("gridded wind needs a 'path'")
        spec["path"] = _resolve(spec["path"], base_dir)
        if not Path(spec["path"]).is_file():
            raise ConfigError(f"wind file not found: {spec['path']}")
    return spec


def build_wind(spec):
    spec = validate_wind(spec)
    kind = spec.pop("kind")
    try:
        if kind == "constant":
            return windmod.ConstantField(float(spec.get("speed", 10.0)))
        if kind == "gridded":
            return windmod.load_gridded(spec["path"], frozen=bool(spec.get("frozen", False)),
                                        snapshot=int(spec.get("snapshot", 0)))
        return windmod.synth_shear(int(spec.pop("seed", 0)), int(spec.pop("n_modes", 16)), **spec)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid wind spec: {e}") from e


def config_from_dict(d, base_dir=Path(".")):
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig()
    if "seed" in d:
        cfg.seed = d["seed"]
    if "output_dir" in d:
        cfg.output_dir = _resolve(d["output_dir"], base_dir)
    if "wind" in d:
        cfg.wind = validate_wind(d["wind"], base_dir)
    cfg.params = _merge(SystemParams, cfg.params, d.get("params"), "params")
    if d.get("polar") is not None:
        cfg.polar = _resolve(d["polar"], base_dir)
        if not Path(cfg.polar).is_file():
            raise ConfigError(f"polar file not found: {cfg.polar}")
        try:
            AeroPolar.load(cfg.polar)
        except ValueError as e:
            raise ConfigError(f"invalid polar file: {e}") from e
    try:
        cfg.thresholds = _merge(Thresholds, cfg.thresholds, d.get("thresholds"), "thresholds")
    except ValueError as e:
        raise ConfigError(str(e)) from e
    for section, cls, store in (("phases", PhaseConfig, cfg.phases), ("td3", Td3Config, cfg.td3)):
        sub = d.get(section) or {}
        if not isinstance(sub, dict):
            raise ConfigError(f"{section} must be an object")
        bad = set(sub) - set(PHASES)
        if bad:
            raise ConfigError(f"unknown phases in {section}: {sorted(bad)}")
        for name, over in sub.items():
            store[name] = _merge(cls, store[name], over, f"{section}.{name}")
    for key in ("entry_retries", "checkpoint_every"):
        if key in d:
            setattr(cfg, key, d[key])
    for key in ("seed", "entry_retries", "checkpoint_every"):
        v = getattr(cfg, key)
        if not isinstance(v, int) or isinstance(v, bool) or v < (0 if key == "seed" else 1):
            raise ConfigError(f"{key} must be a {'non-negative' if key == 'seed' else 'positive'} integer")
    env_seed = os.environ.get("AWE_SEED")
    if env_seed:
        try:
            cfg.seed = int(env_seed)
        except ValueError as e:
            raise ConfigError(f"AWE_SEED must be an integer, got {env_seed!r}") from e
    return cfg


def load_config(path=None):
    """Read a config file; ``None`` gives the all-default configuration."""
    if path is None:
        return config_from_dict({})
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except ValueError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    return config_from_dict(d, path.parent)
