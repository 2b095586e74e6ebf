"""Deterministic SVG figures from trajectory files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..env import read_trajectory  # noqa: E402
from ..errors import DataError  # noqa: E402

_RC = {"svg.hashsalt": "awerl", "svg.fonttype": "path", "font.size": 9}
_META = {"Date": None, "Creator": None}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def _col(rows, key):
    return np.array([row[key] for row in rows], dtype=float)


def plot_trajectory(path, out_dir):
    """Write ``<stem>_paths.svg``, ``<stem>_controls.svg``, ``<stem>_power.svg``."""
    path = Path(path)
    rows = read_trajectory(path)
    if not rows:
        raise DataError(f"{path}: trajectory has no rows")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    t, x, y, z = (_col(rows, k) for k in ("t", "x", "y", "z"))
    phases = [row["phase"] for row in rows]
    outputs = []
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
        for name in dict.fromkeys(phases):
            sel = np.array([p == name for p in phases])
            ax1.plot(x[sel], z[sel], marker="." if sel.sum() == 1 else None, label=name)
            ax2.plot(x[sel], y[sel], marker="." if sel.sum() == 1 else None, label=name)
        ax1.set_xlabel("x (m)")
        ax1.set_ylabel("z (m)")
        ax1.set_title("side view")
        ax2.set_xlabel("x (m)")
        ax2.set_ylabel("y (m)")
        ax2.set_title("top view")
        ax2.legend(loc="best")
        fig.tight_layout()
        outputs.append(out_dir / f"{stem}_paths.svg")
        _save(fig, outputs[-1])

        fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
        for ax, key, label in zip(axes, ("alpha_deg", "psi_deg", "beta_rad"),
                                  ("attack angle (deg)", "bank angle (deg)", "beta (rad)")):
            ax.plot(t, _col(rows, key), marker="." if len(rows) == 1 else None)
            ax.set_ylabel(label)
        axes[-1].set_xlabel("t (s)")
        fig.tight_layout()
        outputs.append(out_dir / f"{stem}_controls.svg")
        _save(fig, outputs[-1])

        fig, ax = plt.subplots(figsize=(7, 3))
        ax.plot(t, _col(rows, "power_kW"), marker="." if len(rows) == 1 else None)
        ax.axhline(0.0, color="0.6", lw=0.5)
        ax.set_xlabel("t (s)")
        ax.set_ylabel("power (kW)")
        fig.tight_layout()
        outputs.append(out_dir / f"{stem}_power.svg")
        _save(fig, outputs[-1])
    return outputs


def plot(paths, out_dir):
    if not paths:
        raise DataError("no trajectory files given")
    out = []
    for p in paths:
        out += plot_trajectory(p, out_dir)
    return out
