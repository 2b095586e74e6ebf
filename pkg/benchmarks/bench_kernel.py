"""Time the compiled and pure-Python kernels on the same integration work.

Usage: python3 benchmarks/bench_kernel.py [--steps N] [--repeat R]

Each case integrates ``--steps`` decision steps of 100 RK4 substeps and
reports the best of ``--repeat`` runs per backend, plus the speedup.
"""
import argparse
import time

import numpy as np

from awerl import dynamics as dyn
from awerl import kernel
from awerl.dynamics import ControlAngles, KiteState, Retraction, SystemParams, Traction
from awerl.wind import ConstantField, GriddedField, synth_shear


def gridded_field():
    rng = np.random.default_rng(0)
    data = (10 + rng.normal(size=(4, 17, 16, 32, 3))).astype(np.float32)
    return GriddedField(data, 100.0, 100.0, 100.0, dt_snap=0.5)


CASES = {
    "constant/traction": (ConstantField(10.0), Traction()),
    "gridded/traction": (gridded_field(), Traction()),
    "shear/traction": (synth_shear(0, 16), Traction()),
    "constant/retraction": (ConstantField(10.0), Retraction.from_force(1200.0, SystemParams())),
}


def run(field, mode, backend, steps):
    s = KiteState(0.9, 0.3, 60.0, 0.0, 0.0, 0.5)
    c = ControlAngles(8.0, -1.0)
    t0 = time.perf_counter()
    for k in range(steps):
        s1, _, diag = dyn.integrate_step(s, c, field, mode, t0=0.1 * k, z_ceiling=100.0,
                                         backend=backend)
        # restart from the initial state if the kite leaves the domain
        s = KiteState(0.9, 0.3, 60.0, 0.0, 0.0, 0.5) if diag.stop else s1
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = kernel.available_backends()
    print(f"default backend: {kernel.BACKEND}; available: {', '.join(backends)}")
    print(f"{'case':<22}" + "".join(f"{b + ' ms/step':>18}" for b in backends) + f"{'speedup':>10}")
    for name, (field, mode) in CASES.items():
        per = {}
        for b in backends:
            best = min(run(field, mode, b, args.steps) for _ in range(args.repeat))
            per[b] = 1e3 * best / args.steps
        speed = per["python"] / per["cython"] if "cython" in per else float("nan")
        print(f"{name:<22}" + "".join(f"{per[b]:>18.3f}" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
