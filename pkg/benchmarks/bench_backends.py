"""Timing comparison of the numba and numpy kernel backends.

Launches each backend in a fresh interpreter (the flag is read once at
import), runs the same two workloads, and prints a table:

* rbf_forecast: fit a 2-mode interpolant on 200 snapshots, roll out 4000
  prediction steps.
* node_train: train a 2-64-2 tanh network for a fixed number of epochs on a
  63-snapshot latent rotation.

The numba pass warms every kernel up before the clock starts, so JIT
compilation is not counted.

Usage: python3 benchmarks/bench_backends.py [--epochs N] [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

SRC = Path(__file__).resolve().parents[1] / "src"


def _workloads(epochs: int, repeat: int) -> dict:
    import numpy as np

    from nirom import rbf as rbf_mod
    from nirom.accel import backend_name
    from nirom.node import TrainConfig, build_net, scale_fit
    from nirom.node.training import train
    from nirom.pod import LatentTrajectory

    def rotation(n_steps: int, span: float) -> LatentTrajectory:
        t = np.linspace(0.0, span, n_steps)
        return LatentTrajectory(np.vstack([np.cos(t), np.sin(t)]), t)

    timings = {"backend": backend_name()}

    traj = rotation(200, 6.0)
    model = rbf_mod.fit(traj, 0.5)
    horizon = np.linspace(0.0, 6.0, 4000)
    rbf_mod.forecast(model, traj.coeffs[:, 0], horizon[:4])  # warmup
    best = min(
        _timed(lambda: rbf_mod.forecast(model, traj.coeffs[:, 0], horizon))
        for _ in range(repeat)
    )
    timings["rbf_forecast"] = best

    unit = rotation(63, 1.0)
    net = build_net(2, [64], "tanh", seed=0, time_input=False,
                    scale=scale_fit(unit))
    train(net, unit, TrainConfig(epochs=2))  # warmup
    best = min(
        _timed(lambda: train(net, unit, TrainConfig(epochs=epochs)))
        for _ in range(repeat)
    )
    timings["node_train"] = best
    return timings


def _timed(fn) -> float:
    started = time.perf_counter()
    fn()
    return time.perf_counter() - started


def _run_worker(backend_flag: str, epochs: int, repeat: int) -> dict:
    env = dict(os.environ, NIROM_NUMBA=backend_flag,
               PYTHONPATH=str(SRC) + os.pathsep + os.environ.get("PYTHONPATH", ""))
    proc = subprocess.run(
        [sys.executable, __file__, "--worker",
         "--epochs", str(epochs), "--repeat", str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout.splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--epochs", type=int, default=1500,
                        help="training epochs per node_train run")
    parser.add_argument("--repeat", type=int, default=3,
                        help="repetitions per workload (best is kept)")
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        sys.path.insert(0, str(SRC))
        print(json.dumps(_workloads(args.epochs, args.repeat)))
        return 0

    results = {flag: _run_worker(flag, args.epochs, args.repeat)
               for flag in ("0", "1")}
    numpy_r, numba_r = results["0"], results["1"]
    print(f"{'workload':<14} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for key in ("rbf_forecast", "node_train"):
        ratio = numpy_r[key] / numba_r[key]
        print(f"{key:<14} {numpy_r[key]:>9.3f}s {numba_r[key]:>9.3f}s "
              f"{ratio:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
