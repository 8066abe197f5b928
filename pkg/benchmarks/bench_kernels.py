"""Time the numba and numpy kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--paths N] [--repeat R]

The first numba call includes JIT compilation and is reported separately.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from hetcompat._kernels import _numpy, numba_available
from hetcompat.girsanov import DriftProcess, simulation_plan


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def workloads(paths: int):
    theta = DriftProcess((0.5, 1.0), (1.4, 0.8))
    mu = DriftProcess.constant(0.7)
    plan = simulation_plan(theta, mu, 2.0**-9)
    rng = np.random.default_rng(0)
    qint = rng.integers(0, 5, size=(2, 9))
    fint = np.zeros((2, 3), dtype=np.int64)
    # total mass moved off target 0 by one unit per row is unreachable: full 3^9 sweep
    fint[:, 0] = qint.sum(axis=1) - 1
    fint[:, 2] = 1
    return {
        "normals": lambda m: m.normals(1, np.arange(paths), 512),
        "girsanov_paths": lambda m: m.girsanov_paths(
            7, paths, plan.dtau, plan.theta, plan.step_of, plan.beta, plan.times.size - 1
        ),
        "search_maps (3^9)": lambda m: m.search_maps(qint, fint),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--paths", type=int, default=20000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    mods = {"numpy": _numpy}
    if numba_available():
        from hetcompat._kernels import _numba

        mods["numba"] = _numba
    else:
        print("numba unavailable or disabled; timing the numpy backend only")
    print(f"{'kernel':<20}{'backend':<8}{'first (s)':>11}{'best (s)':>11}")
    for name, work in workloads(args.paths).items():
        for label, mod in mods.items():
            start = time.perf_counter()
            work(mod)
            first = time.perf_counter() - start
            best = best_of(lambda: work(mod), args.repeat)
            print(f"{name:<20}{label:<8}{first:>11.3f}{best:>11.3f}")


if __name__ == "__main__":
    main()
