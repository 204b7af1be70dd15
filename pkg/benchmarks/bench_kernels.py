"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read at
import time:

    python benchmarks/bench_kernels.py            # both, side by side
    python benchmarks/bench_kernels.py --worker   # one run, current env
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _timeit(func, repeat):
    func()  # warm-up (JIT compile or cache load)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        best = min(best, time.perf_counter() - t0)
    return best


def worker(repeat):
    from protplace import kernels
    from protplace._jit import USE_NUMBA
    from protplace.grid import generate_experiment, load_case, ExperimentProfile
    from protplace.observability import algebraic_rank_check, observe_masks
    from protplace.grid import ProtectionPlan
    from protplace.solver import solve_exact

    grid = load_case("case118")
    rng = np.random.default_rng(0)
    masks = [
        (rng.random(grid.n) < 0.5, rng.random(grid.m) < 0.3, rng.random(grid.n) < 0.2)
        for _ in range(200)
    ]

    def oracle_batch():
        for inj, line, pmu in masks:
            observe_masks(grid, inj, line, pmu)

    mat = rng.integers(0, kernels.MERSENNE61, size=(160, 118), dtype=np.uint64)
    plan = ProtectionPlan(grid.bus_ids, (), grid.bus_ids[::4])
    nine = load_case("case9")
    config = generate_experiment(nine, ExperimentProfile(rng_seed=1))

    results = {
        "backend": "numba" if USE_NUMBA else "numpy",
        "observe x200 (118-bus)": _timeit(oracle_batch, repeat),
        "rank_mod_p 160x118": _timeit(lambda: kernels.rank_mod_p(mat.copy()), repeat),
        "algebraic check (118-bus)": _timeit(lambda: algebraic_rank_check(grid, plan), repeat),
        "solve_exact (9-bus seed 1)": _timeit(lambda: solve_exact(nine, config, certify=False), repeat),
    }
    print(json.dumps(results))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--worker", action="store_true")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if args.worker:
        worker(args.repeat)
        return
    rows = []
    for flag in ("0", "1"):
        env = dict(os.environ, PROTPLACE_DISABLE_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, __file__, "--worker", "--repeat", str(args.repeat)],
            env=env, capture_output=True, text=True, check=True,
        )
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))
    fast, slow = rows
    width = max(len(k) for k in fast)
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  speedup")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:<{width}}  {fast[key]:>9.4f}s  {slow[key]:>9.4f}s  {slow[key] / fast[key]:6.1f}x")


if __name__ == "__main__":
    main()
