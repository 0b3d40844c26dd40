"""Relax a random state toward its canonical state and print the approach.

    python3 scripts/relaxation_demo.py --dim 4 --t-end 30 --seed 1
"""

import argparse

import numpy as np

from sea import (
    ConstraintTarget,
    GeneratorSet,
    IntegratorOptions,
    entropy,
    evolve,
    maxent_state,
)
from sea.fixtures import commuting_observable, random_hamiltonian, random_state


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--t-end", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--conserved", action="store_true", help="add one observable commuting with H")
    p.add_argument("--csv", help="write the trajectory here")
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    h = random_hamiltonian(args.dim, rng)
    gens = GeneratorSet.from_arrays(h, [commuting_observable(h, rng)] if args.conserved else [])
    rho0 = random_state(args.dim, rng)
    ref, params = maxent_state(gens, ConstraintTarget.from_state(rho0, gens))
    checkpoints = tuple(np.linspace(0.0, args.t_end, 11)[1:])
    traj = evolve(rho0, gens, opts=IntegratorOptions(t_end=args.t_end, checkpoints=checkpoints))

    print(f"canonical state: beta = {params.beta:.6f}, S = {entropy(ref):.6f}")
    print(f"{'t':>8} {'S':>12} {'dS/dt':>12} {'||rho - rho_eq||':>18}")
    for t in (0.0, *checkpoints):
        i = traj.times.index(t)
        rec = traj.records[i]
        dist = np.linalg.norm(traj.states[i].entries - ref.entries)
        print(f"{t:8.2f} {rec.entropy:12.8f} {rec.entropy_production:12.4e} {dist:18.4e}")
    print(f"{len(traj)} accepted steps")
    if args.csv:
        traj.to_csv(args.csv)


if __name__ == "__main__":
    main()
