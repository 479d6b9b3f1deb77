"""VQE energies against exact diagonalisation on a coupling grid.

    python3 scripts/vqe_accuracy.py --model tfim --n 8 --depth 4 --points 9

Prints one CSV row per coupling: coupling, vqe, exact, relative error,
iterations, converged.
"""

import argparse
import time

import numpy as np

from phaselearn.dataset import WINDOWS
from phaselearn.hamiltonian import build_model, exact_ground
from phaselearn.vqe import OptimizerConfig, sweep


def run(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--model", type=str.upper, choices=["TFIM", "XXZ"], default="TFIM")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--points", type=int, default=9)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    grid = np.linspace(*WINDOWS[args.model], args.points)
    t0 = time.perf_counter()
    s = sweep(args.model, args.n, grid, args.depth, OptimizerConfig(max_iters=args.max_iters, seed=args.seed))
    elapsed = time.perf_counter() - t0
    print("coupling,vqe,exact,rel_error,iterations,converged")
    within = 0
    for e in s:
        exact, _ = exact_ground(build_model(args.model, args.n, e.coupling))
        rel = abs(e.result.final_energy - exact) / abs(exact)
        within += rel <= 0.01
        print(f"{e.coupling:.6f},{e.result.final_energy:.10f},{exact:.10f},{rel:.3e},"
              f"{e.result.iterations_used},{int(e.result.converged)}")
    print(f"# {within}/{len(s)} within 1%; {elapsed:.1f} s")


if __name__ == "__main__":
    run()
