"""Numba vs numpy timing for the hot kernels.

Each backend runs in its own interpreter because the switch
(MCC_PILOT_NUMBA) is read at import time. Usage:

    python benchmarks/bench_kernels.py [--k 11] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from mcc_pilot._accel import backend_name
from mcc_pilot import kernels
from mcc_pilot.solver import SolverConfig, solve_mcc

k, repeat, solve_k = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3])
rng = np.random.default_rng(0)
scheds = [rng.permutation(k).astype(np.int64) for _ in range(2000)]

def best_of(fn):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out

cov_t, cov = best_of(lambda: sum(int(kernels.coverage_kernel(s, k).sum()) for s in scheds))
tab_t, tab = best_of(lambda: int(kernels.column_table(k, 5, k // 2 + 2).astype(np.int64).sum()))
sol_t, sol = best_of(lambda: solve_mcc(SolverConfig(solve_k, budget=None, symmetric_exclusion=False)).objective)
print(json.dumps({"backend": backend_name(), "coverage_2000": [cov_t, cov],
                  "column_table": [tab_t, tab], f"solve_k{solve_k}": [sol_t, sol]}))
"""


def run(flag, args):
    env = dict(os.environ, MCC_PILOT_NUMBA=flag)
    proc = subprocess.run([sys.executable, "-c", CHILD, str(args.k), str(args.repeat), str(args.solve_k)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=11)
    ap.add_argument("--solve-k", type=int, default=7)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    fast, slow = run("1", args), run("0", args)
    print(f"{'kernel':<16}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}  match")
    for name in fast:
        if name == "backend":
            continue
        (tf, vf), (ts, vs) = fast[name], slow[name]
        print(f"{name:<16}{tf:>11.4f}s{ts:>11.4f}s{ts / tf:>9.1f}x  {vf == vs}")


if __name__ == "__main__":
    main()
