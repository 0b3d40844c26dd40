"""Bipartite (A, B) systems: tensor products, partial traces, reduced operators
and the composite SEA equation.

Basis ordering is A-major: the product index is ``i_A * dim_B + i_B``.

The dissipative terms use the entropy operator ``S = -k P_supp ln(rho)`` and
the effective local operators ``(X)^A = Tr_B[(I_A x rho_B) X]``:

    drho/dt = -(i/hbar)[H, rho]
              + 1/(2 k tau_A) (sqrt(rho_A) D_A + D_A^dagger sqrt(rho_A)) x rho_B
              + 1/(2 k tau_B) rho_A x (sqrt(rho_B) D_B + D_B^dagger sqrt(rho_B))

with ``D_A = sqrt(rho_A)(S)^A - [sqrt(rho_A)(S)^A]_{L(sqrt(rho_A), sqrt(rho_A)(H)^A)}``.
Since ``S`` carries ``-k``, the plus sign here is the same convention as the
single-system equation, and the entropy production is
``||D_A||^2/(k tau_A) + ||D_B||^2/(k tau_B) >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import FlowEval, IntegratorOptions, integrate_model
from .gram import PIVOT_TOL, gram_system, operator_scale, projection_coefficients
from .state import (
    QUANTUM,
    PhysicalConstants,
    StateError,
    StateMatrix,
    as_observable,
    entropy,
    inner_product,
    spectral_function,
    sqrt_rho,
)
from .trajectory import Trajectory

KEEP_A = "A"
KEEP_B = "B"

# recorded in trajectory metadata and CLI reports
SIGN_CONVENTION = ("+1/(2 k tau_X) (sqrt(rho_X) D_X + h.c.) with S = -k P_supp ln(rho); "
                   "entropy production sum_X ||D_X||^2 / (k tau_X) >= 0")


@dataclass(frozen=True, eq=False)
class CompositeSystem:
    dim_A: int
    dim_B: int
    H: np.ndarray
    tau_A: float = 1.0
    tau_B: float = 1.0
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        h = as_observable(self.H, QUANTUM)
        if h.shape != (self.dim_A * self.dim_B,) * 2:
            raise StateError(f"H has shape {h.shape}, expected dimension {self.dim_A * self.dim_B}")
        if not (self.tau_A > 0 and self.tau_B > 0):
            raise ValueError("tau_A and tau_B must be positive")
        object.__setattr__(self, "H", h)

    @classmethod
    def from_parts(cls, h_a, h_b, v_ab=None, tau_A=1.0, tau_B=1.0,
                   constants: PhysicalConstants = PhysicalConstants()) -> "CompositeSystem":
        """``H = H_A x I_B + I_A x H_B + V_AB``."""
        h_a = as_observable(h_a, QUANTUM)
        h_b = as_observable(h_b, QUANTUM)
        da, db = h_a.shape[0], h_b.shape[0]
        h = np.kron(h_a, np.eye(db)) + np.kron(np.eye(da), h_b)
        if v_ab is not None:
            h = h + as_observable(v_ab, QUANTUM)
        return cls(da, db, h, tau_A, tau_B, constants)

    @property
    def dims(self) -> tuple:
        return (self.dim_A, self.dim_B)


@dataclass(frozen=True, eq=False)
class ReducedOperators:
    H_A_eff: np.ndarray
    H_B_eff: np.ndarray
    S_A_eff: np.ndarray
    S_B_eff: np.ndarray
    S_op: np.ndarray


def _entries(x):
    return x.entries if isinstance(x, StateMatrix) else np.asarray(x)


def tensor_product(a, b):
    """Kronecker product; two states give a state."""
    out = np.kron(_entries(a), _entries(b))
    if isinstance(a, StateMatrix) and isinstance(b, StateMatrix):
        return StateMatrix.from_array(out.astype(complex), QUANTUM)
    return out


def _check_dims(x: np.ndarray, dims) -> tuple[int, int]:
    da, db = (int(v) for v in dims)
    if x.shape != (da * db, da * db):
        raise StateError(f"matrix of shape {x.shape} does not factor as {da} x {db}")
    return da, db


def partial_trace_matrix(x: np.ndarray, keep: str, dims) -> np.ndarray:
    """Partial trace of any product-space matrix, keeping subsystem ``keep``."""
    x = np.asarray(x)
    da, db = _check_dims(x, dims)
    t = x.reshape(da, db, da, db)
    if keep == KEEP_A:
        return np.einsum("ikjk->ij", t)
    if keep == KEEP_B:
        return np.einsum("kikj->ij", t)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def partial_trace(rho: StateMatrix, keep: str, dims) -> StateMatrix:
    out = partial_trace_matrix(rho.entries, keep, dims)
    return StateMatrix.from_array(0.5 * (out + out.conj().T), QUANTUM, check=False)


def reduced_operator(rho: StateMatrix, x: np.ndarray, which: str, dims) -> np.ndarray:
    """``(X)^A = Tr_B[(I_A x rho_B) X]`` (``which='A'``), or the mirror for ``B``."""
    x = np.asarray(x)
    da, db = _check_dims(x, dims)
    if rho.dim != da * db:
        raise StateError("state and operator dimensions differ")
    if which == KEEP_A:
        rho_b = partial_trace_matrix(rho.entries, KEEP_B, dims)
        out = partial_trace_matrix(np.kron(np.eye(da), rho_b) @ x, KEEP_A, dims)
    elif which == KEEP_B:
        rho_a = partial_trace_matrix(rho.entries, KEEP_A, dims)
        out = partial_trace_matrix(np.kron(rho_a, np.eye(db)) @ x, KEEP_B, dims)
    else:
        raise ValueError(f"which must be 'A' or 'B', got {which!r}")
    # Hermitian whenever X is; symmetrise away roundoff
    return 0.5 * (out + out.conj().T)


def entropy_operator(rho: StateMatrix, k: float = 1.0) -> np.ndarray:
    """``S = -k P_supp ln(rho)``, zero on the kernel of ``rho``."""
    return -k * spectral_function(rho, np.log)


def reduced_operators(rho: StateMatrix, sys: CompositeSystem) -> ReducedOperators:
    s_op = entropy_operator(rho, sys.constants.k)
    return ReducedOperators(
        reduced_operator(rho, sys.H, KEEP_A, sys.dims),
        reduced_operator(rho, sys.H, KEEP_B, sys.dims),
        reduced_operator(rho, s_op, KEEP_A, sys.dims),
        reduced_operator(rho, s_op, KEEP_B, sys.dims),
        s_op,
    )


def _local_dissipator(rho_sub: StateMatrix, h_eff, s_eff, pivot_tol):
    root = sqrt_rho(rho_sub)
    v = root @ s_eff
    gs = gram_system([root, root @ h_eff], QUANTUM, pivot_tol, [1.0, operator_scale(h_eff, QUANTUM)])
    coef = projection_coefficients(v, gs)
    d = v.copy()
    for c, e in zip(coef, gs.basis):
        d = d - c * e
    sym = root @ d + d.conj().T @ root
    return d, 0.5 * (sym + sym.conj().T)


@dataclass(frozen=True, eq=False)
class CompositeTerms:
    commutator: np.ndarray
    dissipative: np.ndarray
    D_A: np.ndarray
    D_B: np.ndarray
    rho_A: StateMatrix
    rho_B: StateMatrix

    @property
    def total(self) -> np.ndarray:
        return self.commutator + self.dissipative


def composite_terms(rho: StateMatrix, sys: CompositeSystem,
                    pivot_tol: float = PIVOT_TOL) -> CompositeTerms:
    k = sys.constants.k
    rho_a = partial_trace(rho, KEEP_A, sys.dims)
    rho_b = partial_trace(rho, KEEP_B, sys.dims)
    ops = reduced_operators(rho, sys)
    d_a, sym_a = _local_dissipator(rho_a, ops.H_A_eff, ops.S_A_eff, pivot_tol)
    d_b, sym_b = _local_dissipator(rho_b, ops.H_B_eff, ops.S_B_eff, pivot_tol)
    diss = (np.kron(sym_a, rho_b.entries) / (2 * k * sys.tau_A)
            + np.kron(rho_a.entries, sym_b) / (2 * k * sys.tau_B))
    r = rho.entries
    comm = (-1j / sys.constants.hbar) * (sys.H @ r - r @ sys.H)
    return CompositeTerms(comm, diss, d_a, d_b, rho_a, rho_b)


def composite_rhs(rho: StateMatrix, sys: CompositeSystem, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    return composite_terms(rho, sys, pivot_tol).total


def composite_entropy_production(rho: StateMatrix, sys: CompositeSystem,
                                 pivot_tol: float = PIVOT_TOL) -> float:
    t = composite_terms(rho, sys, pivot_tol)
    k = sys.constants.k
    return (inner_product(t.D_A, t.D_A) / (k * sys.tau_A)
            + inner_product(t.D_B, t.D_B) / (k * sys.tau_B))


class CompositeModel:
    def __init__(self, sys: CompositeSystem, pivot_tol: float = PIVOT_TOL):
        self.sys = sys
        self.pivot_tol = pivot_tol
        self.backend = QUANTUM
        self.observables = (sys.H,)
        self.mean_names = ("mean_H",)
        self.extra_names = ("S_A", "S_B", "corr")

    def evaluate(self, rho: StateMatrix) -> FlowEval:
        t = composite_terms(rho, self.sys, self.pivot_tol)
        k = self.sys.constants.k
        na = inner_product(t.D_A, t.D_A)
        nb = inner_product(t.D_B, t.D_B)
        s_a = entropy(t.rho_A, k)
        s_b = entropy(t.rho_B, k)
        s_ab = entropy(rho, k)
        return FlowEval(t.total, na / (k * self.sys.tau_A) + nb / (k * self.sys.tau_B),
                        math.sqrt(na + nb), (s_a, s_b, s_a + s_b - s_ab))

    def entropy(self, rho: StateMatrix) -> float:
        return entropy(rho, self.sys.constants.k)

    def metadata(self) -> dict:
        return {"system": self.sys, "constants": self.sys.constants,
                "sign_convention": SIGN_CONVENTION}


def composite_evolve(rho0: StateMatrix, sys: CompositeSystem,
                     opts: IntegratorOptions = IntegratorOptions()) -> Trajectory:
    """Integrate the composite equation; records ``S_A, S_B, corr`` per step."""
    if rho0.dim != sys.dim_A * sys.dim_B:
        raise StateError("initial state does not match the composite dimension")
    return integrate_model(CompositeModel(sys, opts.pivot_tol), rho0, opts)
