"""Executable checks of the dynamical requirements along trajectories.

``check_invariants`` turns a trajectory into a :class:`VerifyReport`:
state-set membership, conservation of trace and generator means, entropy
monotonicity, support-rank constancy, and agreement of the recorded entropy
production with a finite-difference entropy rate.

The finite difference is taken in extended precision (mpmath) along the
flow direction, in the eigenbasis of the state, so it stays meaningful down
to entropy productions of order 1e-12 where double-precision differences
of ``S`` are pure roundoff.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import highprec
from .dynamics import (
    Equilibrium,
    IntegratorOptions,
    classify_equilibrium,
    evolve,
)
from .gram import gram_system, project
from .maxent import AttainabilityError, ConstraintTarget, _solve_dual, maxent_state
from .state import (
    CLASSICAL,
    GeneratorSet,
    PhysicalConstants,
    StateMatrix,
    hermitian_defect,
    identity,
    mean_value,
    spectral_function,
)
from .trajectory import Trajectory

@dataclass(frozen=True)
class Tolerances:
    trace: float = 1e-8
    min_eigenvalue: float = 1e-8
    hermitian: float = 1e-12
    mean_drift: float = 1e-6
    monotonicity: float = 1e-10
    production_rel: float = 1e-6
    # production is compared with the finite difference only where ||D|| exceeds this
    production_min_dissipator: float = 1e-6
    production_floor: float = 1e-12
    # if set, the last record's ||D|| must not exceed it (runs expected to relax)
    final_dissipator_norm: float | None = None


@dataclass
class CheckResult:
    check_name: str
    passed: bool
    worst_value: float
    tolerance: float
    step_index: int | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.check_name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _worst(values, tol, name, detail=""):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return CheckResult(name, True, 0.0, tol, None, detail or "no applicable steps")
    i = int(np.argmax(values))
    return CheckResult(name, bool(values[i] <= tol), float(values[i]), tol, i, detail)


def entropy_rate_fd(traj_or_meta, state: StateMatrix) -> float:
    """Extended-precision finite-difference ``dS/dt`` at ``state`` for a trajectory's model."""
    meta = traj_or_meta.metadata if isinstance(traj_or_meta, Trajectory) else traj_or_meta
    if "system" in meta:
        sys = meta["system"]
        c = sys.constants
        return highprec.composite_rate(state, sys.H, sys.dims, sys.tau_A, sys.tau_B, c.k, c.hbar)[0]
    gens = meta["generators"]
    c = meta["constants"]
    return highprec.single_rate(state, gens.generators, c.tau, c.k, c.hbar)[0]


# ---------------------------------------------------------------------------
# invariant checks
# ---------------------------------------------------------------------------

def _observables(traj: Trajectory):
    meta = traj.metadata
    if "system" in meta:
        return (meta["system"].H,)
    if "generators" in meta:
        return meta["generators"].generators
    return ()


def check_invariants(traj: Trajectory, tolerances: Tolerances = Tolerances(),
                     finite_difference: bool = True) -> VerifyReport:
    """Pass/fail report for a trajectory. Failures are entries, never exceptions."""
    if not len(traj):
        raise ValueError("empty trajectory")
    tol = tolerances
    report = VerifyReport()
    states = traj.states
    records = traj.records

    min_eigs = np.array([min(s.min_eigenvalue, r.min_eigenvalue) for s, r in zip(states, records)])
    report.checks.append(_worst(np.maximum(0.0, -min_eigs), tol.min_eigenvalue, "state_set_nonnegative"))
    report.checks.append(_worst([hermitian_defect(s.entries) for s in states], tol.hermitian,
                                "state_set_hermitian"))
    traces = np.array([float(np.real(np.sum(s.entries) if s.backend == CLASSICAL
                                     else np.trace(s.entries))) for s in states])
    trace_err = np.maximum(np.abs(traces - 1.0), np.abs([r.trace_error for r in records]))
    report.checks.append(_worst(trace_err, tol.trace, "conservation_trace"))

    for name, obs in zip(traj.mean_names, _observables(traj)):
        means = np.array([mean_value(s, obs) for s in states])
        drift = np.abs(means - means[0]) / max(1.0, abs(means[0]))
        report.checks.append(_worst(drift, tol.mean_drift, f"conservation_{name}"))

    entropies = np.array([r.entropy for r in records])
    if traj.backward:
        report.checks.append(CheckResult("entropy_monotonicity", True, 0.0, tol.monotonicity, None,
                                         "skipped: backward run"))
    else:
        drops = np.concatenate([[0.0], entropies[:-1] - entropies[1:]])
        report.checks.append(_worst(drops, tol.monotonicity, "entropy_monotonicity"))

    prods = np.array([r.entropy_production for r in records])
    report.checks.append(_worst(np.maximum(0.0, -prods), tol.production_floor,
                                "entropy_production_nonnegative"))

    ranks = np.array([s.rank for s in states])
    report.checks.append(_worst(np.abs(ranks - ranks[0]).astype(float), 0.0, "support_rank_constant",
                                f"initial rank {int(ranks[0])}"))

    if tol.final_dissipator_norm is not None:
        last = records[-1].dissipator_norm
        report.checks.append(CheckResult("final_dissipator_norm", bool(last <= tol.final_dissipator_norm),
                                         float(last), tol.final_dissipator_norm, len(records) - 1))

    if finite_difference and ("generators" in traj.metadata or "system" in traj.metadata):
        rel = np.zeros(len(states))
        used = 0
        for i, (s, r) in enumerate(zip(states, records)):
            if r.dissipator_norm <= tol.production_min_dissipator:
                continue
            fd = entropy_rate_fd(traj, s)
            rel[i] = abs(r.entropy_production - fd) / max(abs(fd), 1e-300)
            used += 1
        res = _worst(rel, tol.production_rel, "production_vs_finite_difference",
                     f"{used} steps with ||D|| > {tol.production_min_dissipator:g}")
        report.checks.append(res)
    return report


# ---------------------------------------------------------------------------
# instability probe
# ---------------------------------------------------------------------------

class ProbeInfeasible(ValueError):
    """The perturbation cannot be built with the required mean values."""


@dataclass
class ProbeReport:
    mode: str
    delta: float
    classification: str
    perturbed: StateMatrix
    trajectory: Trajectory
    reference_maxent: StateMatrix
    max_distance: float
    final_distance_to_maxent: float
    final_distance_to_equilibrium: float
    mean_shift: float

    @property
    def departure_ratio(self) -> float:
        return self.max_distance / self.delta

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "delta": self.delta,
            "classification": self.classification,
            "max_distance": self.max_distance,
            "departure_ratio": self.departure_ratio,
            "final_distance_to_maxent": self.final_distance_to_maxent,
            "final_distance_to_equilibrium": self.final_distance_to_equilibrium,
            "initial_mean_shift": self.mean_shift,
            "steps": len(self.trajectory),
        }


def _complement_perturbation(rho_eq: StateMatrix, gens: GeneratorSet, delta: float) -> np.ndarray:
    backend = rho_eq.backend
    lam, vecs = rho_eq.spectrum
    kernel = ~rho_eq.support
    m = int(np.count_nonzero(kernel))
    if m == 0:
        raise ProbeInfeasible("state has full support; use the interior perturbation")
    means_eq = np.array([mean_value(rho_eq, g) for g in gens.generators])
    if backend == CLASSICAL:
        idx = vecs[kernel]
        restricted = [g[idx] for g in gens.generators]
        sigma_sub = np.full(m, 1.0 / m)
    else:
        q = vecs[:, kernel]
        restricted = [q.conj().T @ g @ q for g in gens.generators]
        sigma_sub = np.eye(m, dtype=complex) / m
    sub_means = np.array([float(np.real(np.sum(sigma_sub * g) if backend == CLASSICAL
                                        else np.trace(sigma_sub @ g))) for g in restricted])
    if np.max(np.abs(sub_means - means_eq) / np.maximum(1.0, np.abs(means_eq))) > 1e-12:
        # maximally mixed complement shifts the means; use the complement's
        # canonical state with the equilibrium's mean values instead
        try:
            sigma_sub = _solve_dual(restricted, means_eq, backend)[0]
        except AttainabilityError as exc:
            raise ProbeInfeasible(f"cannot conserve mean values on the complement: {exc}") from exc
    if backend == CLASSICAL:
        sigma = np.zeros(rho_eq.dim)
        sigma[idx] = np.real(sigma_sub)
    else:
        sigma = q @ sigma_sub @ q.conj().T
    return (1.0 - delta) * rho_eq.entries + delta * sigma


def _interior_perturbation(rho_eq: StateMatrix, gens: GeneratorSet, delta: float, seed: int) -> np.ndarray:
    backend = rho_eq.backend
    rng = np.random.default_rng(seed)
    d = rho_eq.dim
    if backend == CLASSICAL:
        w = rng.normal(size=d)
    else:
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        w = 0.5 * (a + a.conj().T)
    # keep w inside the support so rank and positivity are untouched
    p = spectral_function(rho_eq, np.ones_like)
    w = p * w if backend == CLASSICAL else p @ w @ p
    span = [p * identity(d, backend) if backend == CLASSICAL else p] + [
        (p * g if backend == CLASSICAL else p @ g @ p) for g in gens.generators]
    gs = gram_system(span, backend, scales=[1.0] * len(span))
    w = w - project(w, gs)
    nrm = float(np.linalg.norm(w))
    if nrm < 1e-12:
        raise ProbeInfeasible("no mean-preserving direction inside the support")
    w = w / nrm
    lam_min = float(rho_eq.eigenvalues[rho_eq.support].min())
    if delta >= lam_min:
        raise ProbeInfeasible(f"delta {delta} exceeds smallest support eigenvalue {lam_min:.3e}")
    return rho_eq.entries + delta * w


def instability_probe(rho_eq: StateMatrix, gens: GeneratorSet, delta: float,
                      consts: PhysicalConstants = PhysicalConstants(),
                      opts: IntegratorOptions = IntegratorOptions(t_end=50.0),
                      mode: str | None = None, seed: int = 0) -> ProbeReport:
    """Perturb an equilibrium by ``delta`` and follow the relaxation.

    ``mode="complement"`` (default for partial equilibria) mixes in weight
    ``delta`` of a state on the kernel of ``rho_eq`` with the same mean
    values, maximally mixed when that already conserves them. ``mode="interior"``
    (default for full-rank equilibria) adds ``delta`` times a unit, traceless,
    mean-preserving direction inside the support.
    """
    if not 0.0 < delta <= 1e-2:
        raise ValueError(f"delta must lie in (0, 1e-2], got {delta!r}")
    cls = classify_equilibrium(rho_eq, gens, consts=consts)
    if cls is Equilibrium.NONEQUILIBRIUM:
        raise ValueError("probe requires an equilibrium state")
    if mode is None:
        mode = "complement" if cls is Equilibrium.PARTIAL else "interior"
    if mode == "complement":
        entries = _complement_perturbation(rho_eq, gens, delta)
    elif mode == "interior":
        entries = _interior_perturbation(rho_eq, gens, delta, seed)
    else:
        raise ValueError(f"unknown probe mode {mode!r}")
    perturbed = StateMatrix.from_array(entries, rho_eq.backend)
    means_eq = np.array([mean_value(rho_eq, g) for g in gens.generators])
    target = ConstraintTarget.from_state(perturbed, gens)
    shift = float(np.max(np.abs(target.values - means_eq)))
    reference, _ = maxent_state(gens, target)
    traj = evolve(perturbed, gens, consts, opts)
    dist = [float(np.linalg.norm(s.entries - rho_eq.entries)) for s in traj.states]
    final = traj.final.entries
    return ProbeReport(
        mode=mode,
        delta=delta,
        classification=cls.value,
        perturbed=perturbed,
        trajectory=traj,
        reference_maxent=reference,
        max_distance=max(dist),
        final_distance_to_maxent=float(np.linalg.norm(final - reference.entries)),
        final_distance_to_equilibrium=dist[-1],
        mean_shift=shift,
    )


def frobenius_distance(a: StateMatrix, b: StateMatrix) -> float:
    return float(np.linalg.norm(a.entries - b.entries))


__all__ = [
    "CheckResult",
    "ProbeInfeasible",
    "ProbeReport",
    "Tolerances",
    "VerifyReport",
    "check_invariants",
    "entropy_rate_fd",
    "frobenius_distance",
    "instability_probe",
]
