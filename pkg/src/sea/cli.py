"""Command-line frontend.

    sea maxent|evolve|composite-evolve|verify|probe --config FILE [--seed N] [--out DIR] [--sweep]

Exit status: 0 success, 1 failed checks (or an integration failure), 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .composite import SIGN_CONVENTION, composite_evolve
from .diagnostics import check_invariants, instability_probe
from .dynamics import IntegrationError, classify_equilibrium, evolve
from .gram import ProjectionConditioningError
from .io import state_to_json
from .maxent import (
    AttainabilityError,
    ConstraintTarget,
    MaxEntConvergenceError,
    constraint_residual,
    maxent_state,
)
from .scenario import (
    ConfigError,
    ScenarioConfig,
    build_composite,
    build_generators,
    build_state,
    load_config,
    scenarios_from_doc,
    solve_target,
    target_from,
)
from .state import StateError, entropy

COMMANDS = ("maxent", "evolve", "composite-evolve", "verify", "probe")
EXIT_OK, EXIT_CHECKS, EXIT_INPUT = 0, 1, 2


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _base_report(cfg: ScenarioConfig, command: str, seed: int) -> dict:
    return {"scenario": cfg.name, "command": command, "seed": seed, "backend": cfg.backend,
            "constants": {"k": cfg.constants.k, "hbar": cfg.constants.hbar, "tau": cfg.constants.tau}}


def _maxent(cfg, rng, report):
    gens = build_generators(cfg, rng)
    spec = cfg.maxent
    if spec is None:
        raise ConfigError("scenario needs a 'maxent' section for this command")
    rho, params = solve_target(spec, gens)
    report.update({
        "target": {"mean_H": spec["mean_H"], "mean_N": list(spec.get("mean_N", []))},
        **params.to_dict(),
        "entropy": entropy(rho, cfg.constants.k),
        "residual": constraint_residual(rho, gens, target_from(spec)).tolist(),
        "state": state_to_json(rho),
    })
    return EXIT_OK, None


def _relaxation_summary(traj, gens, cfg, report):
    final = traj.final
    report.update({
        "steps": len(traj),
        "t_final": traj.times[-1],
        "entropy_initial": traj.records[0].entropy,
        "entropy_final": traj.records[-1].entropy,
        "dissipator_norm_final": traj.records[-1].dissipator_norm,
        "final_state": state_to_json(final),
        "final_classification": classify_equilibrium(final, gens, consts=cfg.constants).value,
    })
    try:
        ref, _ = maxent_state(gens, ConstraintTarget.from_state(traj.states[0], gens))
        report["distance_to_maxent"] = float(np.linalg.norm(final.entries - ref.entries))
    except (AttainabilityError, MaxEntConvergenceError) as exc:
        report["distance_to_maxent"] = None
        report["maxent_note"] = str(exc)


def _evolve(cfg, rng, report):
    gens = build_generators(cfg, rng)
    rho0 = build_state(cfg.initial_state or _missing("initial_state"), gens, rng)
    traj = evolve(rho0, gens, cfg.constants, cfg.integrator)
    _relaxation_summary(traj, gens, cfg, report)
    return EXIT_OK, traj


def _composite(cfg, rng, report):
    system, rho0 = build_composite(cfg, rng)
    traj = composite_evolve(rho0, system, cfg.integrator)
    rec = traj.records[-1]
    report.update({
        "dims": list(system.dims),
        "steps": len(traj),
        "t_final": traj.times[-1],
        "entropy_initial": traj.records[0].entropy,
        "entropy_final": rec.entropy,
        "S_A_final": rec.extra[0],
        "S_B_final": rec.extra[1],
        "corr_final": rec.extra[2],
        "final_state": state_to_json(traj.final),
        "sign_convention": SIGN_CONVENTION,
    })
    return EXIT_OK, traj


def _verify(cfg, rng, report):
    if cfg.composite is not None:
        system, rho0 = build_composite(cfg, rng)
        traj = composite_evolve(rho0, system, cfg.integrator)
    else:
        gens = build_generators(cfg, rng)
        rho0 = build_state(cfg.initial_state or _missing("initial_state"), gens, rng)
        traj = evolve(rho0, gens, cfg.constants, cfg.integrator)
    result = check_invariants(traj, cfg.tolerances, cfg.finite_difference)
    report.update({"steps": len(traj), "t_final": traj.times[-1], **result.to_dict()})
    return (EXIT_OK if result.passed else EXIT_CHECKS), traj


def _probe(cfg, rng, report):
    gens = build_generators(cfg, rng)
    rho_eq = build_state(cfg.initial_state or _missing("initial_state"), gens, rng)
    spec = cfg.probe or _missing("probe")
    seed = int(rng.integers(2**32))
    try:
        res = instability_probe(rho_eq, gens, float(spec["delta"]), cfg.constants, cfg.integrator,
                                spec.get("mode"), seed)
    except ValueError as exc:
        # infeasible perturbation, delta out of range, or a non-equilibrium rho_eq
        raise ConfigError(f"probe: {exc}") from exc
    report.update(res.to_dict())
    report["final_state"] = state_to_json(res.trajectory.final)
    return EXIT_OK, res.trajectory


def _missing(what):
    raise ConfigError(f"scenario needs a '{what}' section for this command")


HANDLERS = {
    "maxent": _maxent,
    "evolve": _evolve,
    "composite-evolve": _composite,
    "verify": _verify,
    "probe": _probe,
}


def run_scenario(cfg: ScenarioConfig, command: str, out_dir: str | Path, seed: int = 0) -> int:
    """Run one command on one scenario, writing CSV/JSON into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    report = _base_report(cfg, command, seed)
    traj = None
    try:
        status, traj = HANDLERS[command](cfg, rng, report)
    except (ConfigError, StateError, AttainabilityError) as exc:
        print(f"error: {cfg.name}: {exc}", file=sys.stderr)
        report.update({"error": str(exc), "status": EXIT_INPUT})
        _write_json(out / cfg.report_json, report)
        return EXIT_INPUT
    except (IntegrationError, MaxEntConvergenceError, ProjectionConditioningError) as exc:
        print(f"failure: {cfg.name}: {exc}", file=sys.stderr)
        report.update({"error": str(exc), "status": EXIT_CHECKS})
        partial = getattr(exc, "trajectory", None)
        if partial is not None and len(partial):
            partial.to_csv(out / cfg.trajectory_csv)
        _write_json(out / cfg.report_json, report)
        return EXIT_CHECKS
    report["status"] = status
    if traj is not None:
        report["integrator"] = cfg.options_dict()
        traj.to_csv(out / cfg.trajectory_csv)
    _write_json(out / cfg.report_json, report)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sea", description="Steepest-entropy-ascent scenarios.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized fixtures (default 0)")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--sweep", action="store_true",
                   help="run every entry of the config's 'scenarios' list, one subdirectory each")
    p.add_argument("--workers", type=int, default=4, help="worker threads for --sweep")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = load_config(args.config)
        configs = scenarios_from_doc(doc)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if len(configs) > 1 and not args.sweep:
        print("error: config holds several scenarios; pass --sweep", file=sys.stderr)
        return EXIT_INPUT
    if not args.sweep:
        return run_scenario(configs[0], args.command, args.out, args.seed)
    out = Path(args.out)

    def job(cfg):
        return run_scenario(cfg, args.command, out / cfg.name, args.seed)

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        codes = list(pool.map(job, configs))
    for cfg, code in zip(configs, codes):
        print(f"{cfg.name}: exit {code}")
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
