"""Newton solver statistics over seeded random instances.

    python3 scripts/random_sweep.py --count 50 --grid 2048
"""

import argparse
import time

import numpy as np

from specmoment.instances import random_instance
from specmoment.numerics import CircleGrid
from specmoment.solvers import NewtonConfig, solve_newton


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--grid", type=int, default=4096)
    args = ap.parse_args(argv)

    grid = CircleGrid(args.grid)
    cfg = NewtonConfig(grid_size=grid.size)
    rows = []
    print(f"{'seed':>5} {'n':>3} {'m':>3} {'iters':>5} {'seconds':>8} {'stationarity':>12} "
          f"{'moments':>10} {'divergence':>11}")
    for seed in range(args.first_seed, args.first_seed + args.count):
        inst = random_instance(seed, grid)
        t0 = time.perf_counter()
        res = solve_newton(inst.Sigma, inst.prior, inst.bank, cfg)
        dt = time.perf_counter() - t0
        rows.append((res.iterations, dt, res.stationarity_residual, res.moment_residual))
        print(f"{seed:>5d} {inst.bank.n:>3d} {inst.bank.m:>3d} {res.iterations:>5d} {dt:>8.3f} "
              f"{res.stationarity_residual:>12.2e} {res.moment_residual:>10.2e} {res.divergence:>11.5f}")
    it, dt, st, mo = np.array(rows).T
    print(f"\nmax iterations {int(it.max())}, mean time {dt.mean():.3f} s, "
          f"worst stationarity {st.max():.2e}, worst moments {mo.max():.2e}")


if __name__ == "__main__":
    main()
