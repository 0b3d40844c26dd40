"""Gram matrices of state-weighted generators and projections onto their span.

The working projection solves the symmetric positive-definite normal
equations over a greedily selected linearly independent basis. The bordered
Gram-determinant (Cramer) formula is kept as ``project_cramer``, a slow
reference used to cross-check ``project`` in tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .state import GeneratorSet, StateMatrix, identity, inner_product, matmul, sqrt_rho

PIVOT_TOL = 1e-10
# elements whose residual norm is below ABS_FLOOR * (generator scale) are roundoff
ABS_FLOOR = 1e-12
MAX_CONDITION = 1e12
CRAMER_MAX_BASIS = 6


class ProjectionConditioningError(ArithmeticError):
    """The selected Gram submatrix is too ill-conditioned to solve reliably."""


@dataclass(frozen=True, eq=False)
class GramSystem:
    elements: tuple
    gram: np.ndarray
    det: float
    li_indices: tuple
    backend: str
    scales: tuple | None = None

    @property
    def rank(self) -> int:
        return len(self.li_indices)

    @property
    def basis(self) -> tuple:
        return tuple(self.elements[i] for i in self.li_indices)

    @property
    def basis_gram(self) -> np.ndarray:
        idx = np.asarray(self.li_indices)
        return self.gram[np.ix_(idx, idx)]


def gram_matrix(elements: Sequence[np.ndarray], backend: str) -> np.ndarray:
    n = len(elements)
    m = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            m[i, j] = m[j, i] = inner_product(elements[i], elements[j], backend)
    return m


def _greedy_pivots(gram: np.ndarray, pivot_tol: float, scales=None) -> list[int]:
    # Fixed-order pivoted Cholesky: keep k iff its squared residual against the
    # span of the kept elements exceeds pivot_tol * ||E_k||^2.
    kept: list[int] = []
    chol_rows: list[np.ndarray] = []
    if scales is None:
        scales = np.zeros(gram.shape[0])
    for k in range(gram.shape[0]):
        norm_sq = gram[k, k]
        floor = (ABS_FLOOR * scales[k]) ** 2
        if norm_sq <= floor:
            continue
        if kept:
            l_kk = _forward_row(gram, kept, chol_rows, k)
            residual = norm_sq - float(np.dot(l_kk, l_kk))
        else:
            l_kk = np.empty(0)
            residual = norm_sq
        if residual > pivot_tol * norm_sq and residual > floor:
            chol_rows.append(np.append(l_kk, np.sqrt(residual)))
            kept.append(k)
    return kept


def _forward_row(gram, kept, chol_rows, k):
    n = len(kept)
    lower = np.zeros((n, n))
    for i, row in enumerate(chol_rows):
        lower[i, : len(row)] = row
    return scipy.linalg.solve_triangular(lower, gram[kept, k], lower=True)


def select_li_basis(gs: GramSystem, pivot_tol: float = PIVOT_TOL) -> list[int]:
    """Indices of a linearly independent spanning subset, in element order.

    Element ``k`` joins iff its squared residual norm against the span of the
    already selected elements exceeds ``pivot_tol`` times its squared norm.
    """
    return _greedy_pivots(gs.gram, pivot_tol, gs.scales)


def gram_system(elements: Sequence[np.ndarray], backend: str,
                pivot_tol: float = PIVOT_TOL, scales: Sequence[float] | None = None) -> GramSystem:
    """Gram system of arbitrary elements with greedy basis selection.

    ``scales[k]`` bounds the natural size of element ``k`` (for
    ``sqrt(rho) R`` this is the spectral norm of ``R``); elements smaller than
    ``ABS_FLOOR * scales[k]`` are treated as exact zeros.
    """
    elements = tuple(np.asarray(e) for e in elements)
    gram = gram_matrix(elements, backend)
    if scales is not None:
        scales = tuple(float(x) for x in scales)
    li = tuple(_greedy_pivots(gram, pivot_tol, scales))
    det = float(np.linalg.det(gram)) if gram.size else 1.0
    return GramSystem(elements, gram, det, li, backend, scales)


def operator_scale(g: np.ndarray, backend: str) -> float:
    if backend == "classical":
        return float(np.max(np.abs(g), initial=0.0))
    return float(np.linalg.norm(g, 2))


def weighted_elements(root: np.ndarray, generators: Sequence[np.ndarray], backend: str) -> list:
    """``[sqrt(rho), sqrt(rho) R_1, ...]`` for a given square root of the state."""
    dim = np.shape(root)[0]
    out = [matmul(root, identity(dim, backend), backend)]
    out.extend(matmul(root, g, backend) for g in generators)
    return out


def build_gram(rho: StateMatrix, gens: GeneratorSet, pivot_tol: float = PIVOT_TOL) -> GramSystem:
    """Gram system of ``sqrt(rho) R_k`` with ``R_0 = I, R_1 = H, R_{1+i} = N_i``."""
    if rho.dim != gens.dim or rho.backend != gens.backend:
        raise ValueError("state and generator set do not match in dimension or backend")
    scales = [1.0] + [operator_scale(g, rho.backend) for g in gens.generators]
    return gram_system(weighted_elements(sqrt_rho(rho), gens.generators, rho.backend),
                       rho.backend, pivot_tol, scales)


def _normalized_condition(m: np.ndarray) -> float:
    scale = 1.0 / np.sqrt(np.diag(m))
    return float(np.linalg.cond(m * np.outer(scale, scale)))


def projection_coefficients(v: np.ndarray, gs: GramSystem, refine: bool = True) -> np.ndarray:
    """Coefficients ``c`` with ``(V)_L = sum_i c_i E_i`` over the selected basis."""
    basis = gs.basis
    m = gs.basis_gram
    cond = _normalized_condition(m)
    if cond > MAX_CONDITION:
        raise ProjectionConditioningError(
            f"selected Gram matrix has condition {cond:.3e} > {MAX_CONDITION:.0e}; "
            "increase pivot_tol to drop nearly dependent elements")
    factor = scipy.linalg.cho_factor(m)
    b = np.array([inner_product(v, e, gs.backend) for e in basis])
    coef = scipy.linalg.cho_solve(factor, b)
    if refine:
        # one step of iterative refinement on the residual restores orthogonality
        r = v - _combine(coef, basis)
        b = np.array([inner_product(r, e, gs.backend) for e in basis])
        coef = coef + scipy.linalg.cho_solve(factor, b)
    return coef


def _combine(coef, basis):
    out = np.zeros_like(basis[0], dtype=np.result_type(basis[0], float))
    for c, e in zip(coef, basis):
        out = out + c * e
    return out


def project(v: np.ndarray, gs: GramSystem) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the span of the Gram system."""
    return _combine(projection_coefficients(v, gs), gs.basis)


def laplace_det(m: np.ndarray) -> float:
    """Determinant by cofactor expansion along the first row (exponential cost)."""
    n = m.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(m[0, 0])
    total = 0.0
    for j in range(n):
        if m[0, j] == 0.0:
            continue
        minor = np.delete(np.delete(m, 0, axis=0), j, axis=1)
        total += (-1) ** j * m[0, j] * laplace_det(minor)
    return total


def project_cramer(v: np.ndarray, gs: GramSystem) -> np.ndarray:
    """Bordered Gram-determinant formula for the projection, by cofactor expansion.

    The bordered matrix has first row ``[0, E_1, ..., E_m]`` and rows
    ``[(E_i|V), (E_i|E_1), ..., (E_i|E_m)]``; the projection is minus its
    determinant divided by ``G(E_1, ..., E_m)``. Only the first row holds
    matrices, so expanding along it leaves scalar minors.
    """
    basis = gs.basis
    m = len(basis)
    if m > CRAMER_MAX_BASIS:
        raise ValueError(f"Cramer oracle limited to {CRAMER_MAX_BASIS} elements, got {m}")
    gram = gs.basis_gram
    g = laplace_det(gram)
    lower = np.empty((m, m + 1))
    lower[:, 0] = [inner_product(e, v, gs.backend) for e in basis]
    lower[:, 1:] = gram
    out = np.zeros_like(basis[0], dtype=np.result_type(basis[0], float))
    for j in range(1, m + 1):
        minor = np.delete(lower, j, axis=1)
        out = out + (-1) ** j * laplace_det(minor) * basis[j - 1]
    return -out / g
