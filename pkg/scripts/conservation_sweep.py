"""Run many random relaxations and tabulate worst-case invariant errors.

    python3 scripts/conservation_sweep.py --runs 12 --dims 2 3 4 8 --t-end 50
"""

import argparse
import time

import numpy as np

from sea import GeneratorSet, IntegratorOptions, check_invariants, evolve
from sea.fixtures import commuting_observable, random_hamiltonian, random_state


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--runs", type=int, default=12)
    p.add_argument("--dims", type=int, nargs="+", default=[2, 3, 4, 8])
    p.add_argument("--t-end", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-fd", action="store_true", help="skip the finite-difference production check")
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'run':>3} {'d':>2} {'N':>2} {'steps':>6} {'trace err':>10} {'mean drift':>10} "
          f"{'S drop':>9} {'prod/FD':>9} {'secs':>6}  pass")
    failures = 0
    for i in range(args.runs):
        d = args.dims[i % len(args.dims)]
        h = random_hamiltonian(d, rng)
        conserved = [commuting_observable(h, rng)] if i % 2 else []
        gens = GeneratorSet.from_arrays(h, conserved)
        start = time.perf_counter()
        traj = evolve(random_state(d, rng), gens, opts=IntegratorOptions(t_end=args.t_end))
        rep = check_invariants(traj, finite_difference=not args.no_fd)
        secs = time.perf_counter() - start
        drift = max(c.worst_value for c in rep.checks if c.check_name.startswith("conservation_mean"))
        fd = rep["production_vs_finite_difference"].worst_value if not args.no_fd else float("nan")
        failures += not rep.passed
        print(f"{i:3d} {d:2d} {len(conserved):2d} {len(traj):6d} "
              f"{rep['conservation_trace'].worst_value:10.1e} {drift:10.1e} "
              f"{rep['entropy_monotonicity'].worst_value:9.1e} {fd:9.1e} {secs:6.2f}  {rep.passed}")
    print(f"{failures} of {args.runs} runs failed a check")


if __name__ == "__main__":
    main()
