"""Steepest-entropy-ascent dynamics for finite-dimensional quantum and classical states."""

from .composite import CompositeSystem, composite_evolve, partial_trace, reduced_operator
from .diagnostics import Tolerances, VerifyReport, check_invariants, instability_probe
from .dynamics import (
    Equilibrium,
    IntegrationError,
    IntegratorOptions,
    classify_equilibrium,
    dissipator,
    entropy_production,
    evolve,
    rhs,
)
from .gram import build_gram, project, project_cramer
from .maxent import ConstraintTarget, maxent_state, partial_canonical_state
from .state import (
    CLASSICAL,
    QUANTUM,
    GeneratorSet,
    PhysicalConstants,
    StateMatrix,
    diag_state,
    entropy,
    maximally_mixed,
    mean_value,
    pure_state,
)
from .trajectory import Trajectory

__all__ = [
    "CLASSICAL",
    "QUANTUM",
    "CompositeSystem",
    "ConstraintTarget",
    "Equilibrium",
    "GeneratorSet",
    "IntegrationError",
    "IntegratorOptions",
    "PhysicalConstants",
    "StateMatrix",
    "Tolerances",
    "Trajectory",
    "VerifyReport",
    "build_gram",
    "check_invariants",
    "classify_equilibrium",
    "composite_evolve",
    "diag_state",
    "dissipator",
    "entropy",
    "entropy_production",
    "evolve",
    "instability_probe",
    "maxent_state",
    "maximally_mixed",
    "mean_value",
    "partial_canonical_state",
    "partial_trace",
    "project",
    "project_cramer",
    "pure_state",
    "reduced_operator",
    "rhs",
]
