"""Steepest-entropy-ascent dynamics for a single system.

    drho/dt = -(i/hbar) [H, rho] - (1/2tau) (sqrt(rho) D + D^dagger sqrt(rho))
    D = sqrt(rho) ln(rho) - projection of sqrt(rho) ln(rho) onto
        span{sqrt(rho), sqrt(rho) H, sqrt(rho) N_1, ...}

Along this flow ``Tr rho`` and every ``<R_k>`` are conserved and
``dS/dt = (k/tau) (D|D)``: the commutator term leaves the spectrum alone,
``Tr(rho_dot) = 0`` kills the ``-k Tr(rho_dot)`` part of the chain rule, and
``D`` is orthogonal to the projection of ``sqrt(rho) ln(rho)``, so
``(sqrt(rho) ln rho | D) = (D | D)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import integrate
from .gram import PIVOT_TOL, build_gram, projection_coefficients
from .state import (
    CLASSICAL,
    EPS_RANK,
    GeneratorSet,
    PhysicalConstants,
    StateMatrix,
    dagger,
    entropy,
    inner_product,
    matmul,
    mean_value,
    spectral_function,
    sqrt_and_log,
)
from .trajectory import DiagnosticsRecord, Trajectory

MIN_STEP = 1e-14
BREACH_FACTOR = 10.0
TRACE_TOL = 1e-8
MIN_EIG_TOL = 1e-8
MEAN_DRIFT_TOL = 1e-6


class IntegrationError(RuntimeError):
    """Integration stopped; ``last_time``/``last_state`` hold the last valid point."""

    def __init__(self, message, last_time=None, last_state=None, trajectory=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state
        self.trajectory = trajectory


class InvariantBreach(IntegrationError):
    pass


class Equilibrium(str, enum.Enum):
    NONEQUILIBRIUM = "nonequilibrium"
    MAX_ENTROPY = "max_entropy_equilibrium"
    PARTIAL = "partial_equilibrium"


@dataclass(frozen=True)
class IntegratorOptions:
    t_end: float = 10.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    renormalize: bool = True
    # accepted steps are shortened to land exactly on these times
    checkpoints: tuple = ()
    first_step: float | None = None
    max_steps: int = 200_000
    pivot_tol: float = PIVOT_TOL

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("integrator tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


@dataclass(frozen=True, eq=False)
class DissipatorTerm:
    D: np.ndarray
    norm_sq: float
    dissipative_rhs: np.ndarray
    # projection coefficients per element [sqrt(rho), sqrt(rho) H, sqrt(rho) N_i...]
    # (zero for elements dropped from the basis)
    coefficients: np.ndarray = field(default=None)


def _dissipator_parts(root, root_log, gs, tau, backend):
    coef = projection_coefficients(root_log, gs)
    d = root_log.astype(np.result_type(root_log, float), copy=True)
    for c, e in zip(coef, gs.basis):
        d = d - c * e
    sym = matmul(root, d, backend) + matmul(dagger(d, backend), root, backend)
    full = np.zeros(len(gs.elements))
    full[list(gs.li_indices)] = coef
    return d, -sym / (2.0 * tau), full


def dissipator(rho: StateMatrix, gens: GeneratorSet,
               consts: PhysicalConstants = PhysicalConstants(),
               pivot_tol: float = PIVOT_TOL) -> DissipatorTerm:
    """The dissipator ``D(rho)`` and its contribution to ``drho/dt``.

    Raises :class:`~sea.gram.ProjectionConditioningError` if the selected
    Gram basis is too ill-conditioned.
    """
    root, root_log, _ = sqrt_and_log(rho)
    gs = build_gram(rho, gens, pivot_tol)
    d, diss, coef = _dissipator_parts(root, root_log, gs, consts.tau, rho.backend)
    if rho.backend != CLASSICAL:
        diss = 0.5 * (diss + diss.conj().T)
    return DissipatorTerm(d, inner_product(d, d, rho.backend), diss, coef)


def commutator_rhs(rho: StateMatrix, gens: GeneratorSet, consts: PhysicalConstants) -> np.ndarray:
    """``-(i/hbar)[H, rho]``; identically zero in the classical backend."""
    if rho.backend == CLASSICAL:
        return np.zeros_like(rho.entries)
    h = gens.hamiltonian
    r = rho.entries
    return (-1j / consts.hbar) * (h @ r - r @ h)


def rhs(rho: StateMatrix, gens: GeneratorSet, consts: PhysicalConstants = PhysicalConstants(),
        pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Right-hand side ``drho/dt`` (Hermitian, traceless)."""
    return commutator_rhs(rho, gens, consts) + dissipator(rho, gens, consts, pivot_tol).dissipative_rhs


def entropy_production(rho: StateMatrix, gens: GeneratorSet,
                       consts: PhysicalConstants = PhysicalConstants(),
                       pivot_tol: float = PIVOT_TOL) -> float:
    """``dS/dt = (k/tau) (D|D)``."""
    return consts.k / consts.tau * dissipator(rho, gens, consts, pivot_tol).norm_sq


def default_equilibrium_tol(rho: StateMatrix, gens: GeneratorSet,
                            consts: PhysicalConstants = PhysicalConstants()) -> float:
    root_log = spectral_function(rho, lambda x: np.sqrt(x) * np.log(x))
    scale = math.sqrt(inner_product(root_log, root_log, rho.backend))
    # roundoff floor for states (e.g. pure ones) where sqrt(rho) ln(rho) vanishes
    h = gens.hamiltonian
    floor = 1e-12 * (1.0 + float(np.max(np.abs(h))) / consts.hbar) * rho.dim
    return max(1e-9 * scale, floor)


def classify_equilibrium(rho: StateMatrix, gens: GeneratorSet, tol: float | None = None,
                         consts: PhysicalConstants = PhysicalConstants()) -> Equilibrium:
    """Nonequilibrium if ``||rhs||_F > tol``; otherwise max-entropy (full support)
    or partial equilibrium (rank-deficient support)."""
    if tol is None:
        tol = default_equilibrium_tol(rho, gens, consts)
    drift = rhs(rho, gens, consts)
    if np.linalg.norm(drift) > tol:
        return Equilibrium.NONEQUILIBRIUM
    if rho.rank == rho.dim:
        return Equilibrium.MAX_ENTROPY
    return Equilibrium.PARTIAL


# ---------------------------------------------------------------------------
# time integration
# ---------------------------------------------------------------------------

@dataclass
class FlowEval:
    drift: np.ndarray
    production: float
    dissipator_norm: float
    extra: tuple = ()


class SingleSystemModel:
    """Adapter giving the evolve loop what it needs for one system."""

    def __init__(self, gens: GeneratorSet, consts: PhysicalConstants, pivot_tol: float = PIVOT_TOL):
        self.gens = gens
        self.consts = consts
        self.pivot_tol = pivot_tol
        self.backend = gens.backend
        self.observables = gens.generators
        self.mean_names = ("mean_H",) + tuple(f"mean_N{i + 1}" for i in range(len(gens.conserved)))
        self.extra_names = ()

    def evaluate(self, rho: StateMatrix) -> FlowEval:
        term = dissipator(rho, self.gens, self.consts, self.pivot_tol)
        drift = commutator_rhs(rho, self.gens, self.consts) + term.dissipative_rhs
        return FlowEval(drift, self.consts.k / self.consts.tau * term.norm_sq,
                        math.sqrt(term.norm_sq))

    def entropy(self, rho: StateMatrix) -> float:
        return entropy(rho, self.consts.k)

    def metadata(self) -> dict:
        return {"generators": self.gens, "generator_digest": self.gens.digest(),
                "constants": self.consts}


def stage_state(y: np.ndarray, backend: str, rank: int | None = None,
                eps_rank: float = EPS_RANK) -> StateMatrix:
    """Unvalidated state wrapper for intermediate Runge-Kutta stages.

    ``rank`` caps the support at the rank of the step's starting state; the
    exact flow has the form ``K rho + rho K^dagger`` and cannot create support.
    """
    if backend == CLASSICAL:
        return StateMatrix(np.real(y), backend, eps_rank, max_rank=rank)
    return StateMatrix(0.5 * (y + y.conj().T), backend, eps_rank, max_rank=rank)


def _repair(y: np.ndarray, backend: str, renormalize: bool, rank: int | None = None,
            eps_rank: float = EPS_RANK):
    """Hermitize, zero eigenvalues below threshold or beyond ``rank``, renormalise.

    Returns ``(state, raw_min_eigenvalue, raw_trace_error)``.
    """
    if backend == CLASSICAL:
        p = np.array(np.real(y), dtype=float)
        raw_min, raw_tr = float(p.min()), float(p.sum() - 1.0)
        drop = p <= eps_rank * max(p.max(), 1e-300)
        if rank is not None:
            drop[np.argsort(p)[::-1][rank:]] = True
        p[drop] = 0.0
        if renormalize:
            p /= p.sum()
        return StateMatrix(p, backend, eps_rank), raw_min, raw_tr
    h = 0.5 * (y + y.conj().T)
    lam, vecs = np.linalg.eigh(h)
    raw_min, raw_tr = float(lam[0]), float(lam.sum() - 1.0)
    lam = lam.copy()
    drop = lam <= eps_rank * max(lam.max(), 1e-300)
    if rank is not None:
        drop[: len(lam) - rank] = True
    lam[drop] = 0.0
    if renormalize:
        lam /= lam.sum()
    return StateMatrix.from_spectrum(lam, vecs, backend, eps_rank), raw_min, raw_tr


def integrate_model(model, rho0: StateMatrix, opts: IntegratorOptions) -> Trajectory:
    """Adaptive integration of ``model`` from ``rho0`` to ``opts.t_end``.

    After each accepted step the state is repaired (Hermitized, tiny
    eigenvalues clipped, trace renormalised) and a diagnostics record is
    appended. Raises :class:`IntegrationError` on step-size underflow and
    :class:`InvariantBreach` if raw drift exceeds ten times the conservation
    tolerances.
    """
    backend = model.backend
    traj = Trajectory(mean_names=model.mean_names, extra_names=model.extra_names,
                      metadata={**model.metadata(), "options": opts})
    t_end = float(opts.t_end)
    direction = 1.0 if t_end >= 0 else -1.0
    traj.metadata["direction"] = direction
    stops = sorted({float(c) for c in opts.checkpoints if 0 < direction * c < direction * t_end},
                   key=lambda c: direction * c)

    state = rho0
    means0 = np.array([mean_value(rho0, g) for g in model.observables])
    drift_scale = np.maximum(1.0, np.abs(means0))

    def record(t, st, ev, raw_min, raw_tr):
        means = tuple(mean_value(st, g) for g in model.observables)
        traj.append(t, st, DiagnosticsRecord(model.entropy(st), means, ev.production,
                                             ev.dissipator_norm, raw_min, raw_tr, ev.extra))

    ev = model.evaluate(state)
    record(0.0, state, ev, state.min_eigenvalue,
           float(np.real(np.sum(state.entries) if backend == CLASSICAL
                         else np.trace(state.entries))) - 1.0)
    if t_end == 0.0:
        return traj

    rank = state.rank

    def f(_t, y):
        return model.evaluate(stage_state(y, backend, rank)).drift

    t = 0.0
    y = state.entries
    k1 = ev.drift
    if opts.first_step is not None:
        h = float(opts.first_step)
    else:
        h = integrate.initial_step(f, t, y, k1, direction, opts.rel_tol, opts.abs_tol,
                                   min(opts.max_step, abs(t_end)))
    controller = integrate.PIController(opts.rel_tol, opts.abs_tol)
    steps = 0
    while direction * (t_end - t) > 0:
        target = stops[0] if stops else t_end
        remaining = abs(target - t)
        h = min(h, opts.max_step)
        landing = h >= remaining * (1 - 1e-12)
        if landing:
            h_try = remaining
        else:
            h_try = h
        if h_try < MIN_STEP:
            raise IntegrationError(f"step size underflow ({h_try:.3e}) at t = {t!r}", t, state, traj)
        steps += 1
        if steps > opts.max_steps:
            raise IntegrationError(f"exceeded max_steps = {opts.max_steps}", t, state, traj)
        y_new, err = integrate.dopri_step(f, t, y, direction * h_try, k1)
        en = integrate.error_norm(err, y, y_new, opts.rel_tol, opts.abs_tol)
        if not np.isfinite(en):
            h = h_try * integrate.MIN_FACTOR
            continue
        if en <= 1.0:
            t_new = target if landing else t + direction * h_try
            new_state, raw_min, raw_tr = _repair(y_new, backend, opts.renormalize, rank)
            means = np.array([mean_value(new_state, g) for g in model.observables])
            worst_mean = float(np.max(np.abs(means - means0) / drift_scale)) if len(means) else 0.0
            if (abs(raw_tr) > BREACH_FACTOR * TRACE_TOL or raw_min < -BREACH_FACTOR * MIN_EIG_TOL
                    or worst_mean > BREACH_FACTOR * MEAN_DRIFT_TOL):
                raise InvariantBreach(
                    f"invariant breach at t = {t_new!r}: trace error {raw_tr:.3e}, "
                    f"min eigenvalue {raw_min:.3e}, relative mean drift {worst_mean:.3e}",
                    t, state, traj)
            state = new_state
            y = state.entries
            t = t_new
            if landing and stops:
                stops.pop(0)
            ev = model.evaluate(state)
            k1 = ev.drift
            record(t, state, ev, raw_min, raw_tr)
            fac = controller.factor(en, True)
            h = max(h_try * fac, h) if landing else h * fac
        else:
            h = h_try * controller.factor(en, False)
    return traj


def evolve(rho0: StateMatrix, gens: GeneratorSet, consts: PhysicalConstants = PhysicalConstants(),
           opts: IntegratorOptions = IntegratorOptions()) -> Trajectory:
    """Integrate the SEA equation from ``rho0``; negative ``t_end`` runs backward."""
    if rho0.backend != gens.backend or rho0.dim != gens.dim:
        raise ValueError("initial state and generator set do not match")
    return integrate_model(SingleSystemModel(gens, consts, opts.pivot_tol), rho0, opts)
