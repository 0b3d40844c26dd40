"""Perturb equilibria of a three-level ladder and compare how far they wander.

A pure eigenstate other than the ground state is a nondissipative but unstable
equilibrium: weight placed off its support grows until the state reaches the
canonical state with the perturbed mean energy. A canonical state returns.

    python3 scripts/probe_demo.py --delta 1e-4
"""

import argparse

import numpy as np

from sea import ConstraintTarget, GeneratorSet, IntegratorOptions, instability_probe, maxent_state
from sea.state import pure_state


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--delta", type=float, default=1e-4)
    p.add_argument("--t-end", type=float, default=50.0)
    args = p.parse_args()

    gens = GeneratorSet.from_arrays(np.diag([0.0, 1.0, 2.0]))
    opts = IntegratorOptions(t_end=args.t_end)
    canonical, _ = maxent_state(gens, ConstraintTarget(0.8))
    cases = [("middle eigenstate", pure_state([0, 1, 0])), ("canonical, <H> = 0.8", canonical)]
    for label, rho in cases:
        res = instability_probe(rho, gens, args.delta, opts=opts)
        print(f"{label}: {res.classification}, mode {res.mode}")
        print(f"  max distance from start   {res.max_distance:.3e} ({res.departure_ratio:.1f} x delta)")
        print(f"  final distance from start {res.final_distance_to_equilibrium:.3e}")
        print(f"  final distance to maxent  {res.final_distance_to_maxent:.3e}")


if __name__ == "__main__":
    main()
