"""Throughput of the compiled and pure-numpy trajectory kernels.

    python benchmarks/bench_kernels.py [--traj 500] [--steps 2048] [--repeat 3]

Both backends advance the same block of trajectories with the same noise;
the final states are compared before timings are reported.
"""

import argparse
import math
import time

import numpy as np

from qpurify import kernels


def _state(m):
    x = np.zeros(m)
    z = np.zeros(m)
    a = np.ones(m)
    return x, z, a, a.copy()


def _time(backend, normals, uniforms, mode, repeat):
    m = normals.shape[0]
    best = math.inf
    final = None
    for _ in range(repeat):
        x, z, a, w = _state(m)
        steps = np.empty(m, dtype=np.int64)
        frac = np.empty(m)
        if mode == "evolve":
            args = (1e-4, False, -1.0, 0.0, -1.0)
        elif mode == "jacobs":
            args = (1e-4, True, -1.0, 0.0, -1.0)
        else:
            # first passage to s = 1e-2 with the bridge test switched on
            Z = math.sqrt(0.98)
            args = (1e-4, False, 0.02, math.atanh(Z), 1.0 / math.cosh(math.atanh(Z) - 0.08) ** 2)
        t0 = time.perf_counter()
        kernels.get_backend(backend).advance(x, z, a, w, normals, uniforms, *args, steps, frac)
        best = min(best, time.perf_counter() - t0)
        final = (z, w, steps)
    return best, final


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--traj", type=int, default=500)
    p.add_argument("--steps", type=int, default=2048)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    normals = rng.standard_normal((args.traj, args.steps))
    uniforms = rng.random((args.traj, args.steps))
    n = args.traj * args.steps
    names = sorted(kernels.BACKENDS)
    print(f"{args.traj} trajectories x {args.steps} steps; backends: {', '.join(names)}")
    print(f"{'mode':<8} {'backend':<9} {'seconds':>9} {'Msteps/s':>9} {'speedup':>8}")
    for mode in ("evolve", "jacobs", "fpt"):
        results = {b: _time(b, normals, uniforms, mode, args.repeat) for b in names}
        if len(names) == 2:
            (_, a), (_, b) = results["compiled"], results["python"]
            if not (np.allclose(a[0], b[0], rtol=1e-10) and np.array_equal(a[2], b[2])):
                raise SystemExit(f"backends disagree in mode {mode}")
        base = results["python"][0]
        for b in names:
            sec = results[b][0]
            print(f"{mode:<8} {b:<9} {sec:9.4f} {n / sec / 1e6:9.2f} {base / sec:7.1f}x")


if __name__ == "__main__":
    main()
