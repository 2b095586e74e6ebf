"""Command line entry point: ``awerl train|evaluate|simulate|plot``."""
from __future__ import annotations

import argparse
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import kernel
from .errors import AweError, ConfigError, FormatError, NumericalDivergence
from .harness.config import PHASES, load_config, validate_wind

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def build_id():
    return {"awerl": __version__, "kernel": kernel.BACKEND, "numpy": np.__version__,
            "python": platform.python_version()}


def write_manifest(out_dir, command, argv, cfg=None, extra=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "argv": list(argv), "build": build_id()}
    if cfg is not None:
        manifest["seed"] = cfg.seed
        manifest["config"] = cfg.to_dict()
    if extra:
        manifest.update(extra)
    path = out_dir / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _cmd_train(args, argv):
    from .harness.train import train
    cfg = load_config(args.config)
    write_manifest(cfg.output_dir, "train", argv, cfg,
                   {"phase": args.phase, "resume": args.resume})

    def progress(row):
        if args.verbose and (row["episode"] + 1) % args.log_every == 0:
            print(f"{row['phase']} ep {row['episode'] + 1}: return {row['roll_return']:.3f} "
                  f"crash {row['roll_crash_rate']:.2f} energy {row['roll_energy_kwh']:.4f} kWh",
                  file=sys.stderr)

    paths = train(cfg, [args.phase] if args.phase else None, resume=args.resume,
                  progress=progress)
    for phase, path in paths.items():
        print(f"{phase}: {path}")
    return EXIT_OK


def _cmd_evaluate(args, argv):
    from .harness.evaluate import evaluate
    cfg = load_config(args.config)
    wind = None
    if args.wind:
        try:
            wind = validate_wind(json.loads(args.wind))
        except ValueError as e:
            raise ConfigError(f"--wind must be a JSON wind spec: {e}") from e
    out = Path(args.out) if args.out else Path(cfg.output_dir) / "evaluation"
    write_manifest(out, "evaluate", argv, cfg,
                   {"checkpoints": str(args.checkpoints), "episodes": args.episodes, "wind": wind})
    report = evaluate(args.checkpoints, cfg, args.episodes, wind_spec=wind, out_dir=out)
    print(report.format())
    return EXIT_OK


def _cmd_simulate(args, argv):
    from .harness.simulate import load_script, simulate
    cfg = load_config(args.config)
    script = load_script(args.script)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / "simulate"
    write_manifest(out, "simulate", argv, cfg, {"script": script})
    result = simulate(script, cfg)
    traj, log = result.write(out, Path(args.script).stem)
    print(f"{traj} ({len(result.trajectory)} rows, {result.status})")
    if result.clamped:
        print(f"clamped at steps {result.clamped}")
    return EXIT_OK


def _cmd_plot(args, argv):
    from .harness.plot import plot
    write_manifest(args.out, "plot", argv, None, {"inputs": [str(p) for p in args.trajectories]})
    for path in plot(args.trajectories, args.out):
        print(path)
    return EXIT_OK


def make_parser():
    parser = argparse.ArgumentParser(prog="awerl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the phase agents in sequence")
    p.add_argument("--config", type=Path)
    p.add_argument("--phase", choices=PHASES)
    p.add_argument("--resume", action="store_true", help="skip phases with a final checkpoint")
    p.add_argument("--verbose", "-v", action="store_true")
    p.add_argument("--log-every", type=int, default=50)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="fly full cycles with trained agents")
    p.add_argument("--config", type=Path)
    p.add_argument("--checkpoints", type=Path, required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--wind", help="JSON wind spec overriding the config")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("simulate", help="run a scripted control sequence")
    p.add_argument("--config", type=Path)
    p.add_argument("--script", type=Path, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("plot", help="render trajectory files as SVG")
    p.add_argument("trajectories", nargs="+", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = make_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except (ConfigError, FormatError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalDivergence as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except AweError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
