"""Time the compiled and NumPy seeking kernels on the same workloads.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``
"""

import argparse
import time

import numpy as np

from dpnash import kernel
from dpnash.game import Game
from dpnash.network import fully_connected
from dpnash.seeking import NoiseRealization, SeekConfig, seek

TABLE1 = Game.from_arrays([0.015, 0.03, 0.02, 0.015, 0.025, 0.03], [15, 18, 25, 20, 18, 20], 100.0)


def workloads():
    rng = np.random.default_rng(0)
    big = Game.from_arrays(rng.uniform(0.01, 0.05, 20), rng.uniform(5, 30, 20), 100.0)
    return [
        ("table1 exact, alpha=0.4", TABLE1, 0.1, SeekConfig(alpha=0.4, record_every=0), None),
        ("table1 private, alpha=0.05", TABLE1, 0.1, SeekConfig(alpha=0.05, record_every=0),
         NoiseRealization(rng.laplace(scale=2.0, size=6), 2.0)),
        ("20 prosumers, 5000 steps", big, 0.04, SeekConfig(alpha=0.02, max_iter=5000, record_every=0), None),
    ]


def bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = kernel.available_backends()
    print(f"backends: {backends}")
    print(f"{'workload':32s} {'iters':>7s} " + " ".join(f"{b:>12s}" for b in backends) + "  speedup")
    for name, game, omega, cfg, noise in workloads():
        graph = fully_connected(game.count, omega)
        co = game.coefficients()
        times, finals, iters = {}, {}, 0
        for b in backends:
            t, traj = bench(lambda: seek(co, graph, cfg, noise=noise, backend=b), args.repeat)
            times[b], finals[b], iters = t, traj.final, traj.iterations
        if len(finals) > 1:
            assert np.allclose(finals["cython"], finals["python"], rtol=1e-10, atol=1e-10)
        speed = f"{times['python'] / times['cython']:7.1f}x" if "cython" in times else "   n/a"
        print(f"{name:32s} {iters:7d} " + " ".join(f"{1e3 * times[b]:10.2f}ms" for b in backends) + "  " + speed)


if __name__ == "__main__":
    main()
