#!/usr/bin/env python3
"""Column-generation walkthrough: print the per-iteration trace for one instance.

Shows the solver's control flow on a knapsack instance: heuristic pricing,
escalation to exact pricing, support sparsification, and the certified
termination gap.

Example:
    python3 scripts/trace_demo.py --d 8 --seed 82
"""

import argparse
import sys

from doptdesign import model, relaxation
from doptdesign.pricing import Pricer


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--d", type=int, default=8)
    parser.add_argument("--seed", type=int, default=82)
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--gamma", type=float, default=relaxation.GAMMA)
    args = parser.parse_args()

    inst = model.generate_knapsack_instance(args.d, k=args.k, seed=args.seed)
    print(f"knapsack d={args.d} seed={args.seed}: p={inst.p}, k={inst.k}")
    pricer = Pricer(inst.space, inst.model)
    params = relaxation.CGParams(seed=0, gamma=args.gamma)
    cd, cert, trace = relaxation.column_generation(inst, pricer, params)

    print(f"{'iter':>4} {'master_obj':>11} {'nu':>9} {'alpha':>9} {'mode':>6} {'|P|':>4} {'sparse':>6} {'exact':>5}")
    for t in trace:
        alpha = f"{t['alpha']:.5f}" if t["alpha"] is not None else "-"
        print(
            f"{t['iter']:>4} {t['master_obj']:>11.5f} {t['nu']:>9.5f} {alpha:>9} "
            f"{t['mode']:>6} {t['n_points']:>4} {str(t['sparsified']):>6} "
            f"{str(t['ip_solved']):>5}"
        )
    print(f"\nrelaxation objective : {cd.objective:.6f}")
    print(f"certificate objective: {cert.objective:.6f} (valid upper bound)")
    print(f"certified gap        : {cert.objective - cd.objective:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
