"""Maximum-entropy (canonical) and partial-canonical states.

The canonical state with prescribed generator means is found by damped Newton
iteration on the convex dual

    phi(beta, nu) = ln Tr exp(-beta H + sum_i nu_i N_i) + beta <H> - sum_i nu_i <N_i>,

whose gradient is the mean-value residual and whose Hessian is the covariance
matrix of the (signed) generators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .state import (
    CLASSICAL,
    QUANTUM,
    GeneratorSet,
    StateError,
    StateMatrix,
    mean_value,
)

MEAN_TOL = 1e-9
MAX_ITER = 200
ARMIJO = 1e-4
B_TOL = 1e-10


class AttainabilityError(ValueError):
    """Target mean values lie outside the open range the generators allow."""


class MaxEntConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class ConstraintTarget:
    mean_H: float
    mean_N: tuple = ()

    @property
    def values(self) -> np.ndarray:
        return np.array((self.mean_H,) + tuple(self.mean_N), dtype=float)

    @classmethod
    def from_state(cls, rho: StateMatrix, gens: GeneratorSet) -> "ConstraintTarget":
        return cls(mean_value(rho, gens.hamiltonian), tuple(mean_value(rho, n) for n in gens.conserved))


@dataclass(frozen=True, eq=False)
class DualParams:
    """Multipliers of ``rho = exp(-alpha) B exp(-beta H + sum nu_i N_i) B``.

    ``b_projector`` is ``None`` for the full canonical state (``B = I``).
    """

    alpha: float
    beta: float
    nu: tuple = ()
    b_projector: np.ndarray | None = field(default=None, repr=False)
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "nu": list(self.nu),
                "partial": self.b_projector is not None, "iterations": self.iterations}


def _eig_exponent(k: np.ndarray, backend: str):
    if backend == CLASSICAL:
        return k, None
    k = 0.5 * (k + k.conj().T)
    return np.linalg.eigh(k)


def _gibbs(k: np.ndarray, backend: str):
    """``(exp(K)/Z, ln Z)`` for a Hermitian exponent ``K``, overflow-safe."""
    lam, vecs = _eig_exponent(k, backend)
    shift = float(np.max(lam))
    w = np.exp(lam - shift)
    z = float(np.sum(w))
    p = w / z
    log_z = shift + np.log(z)
    if backend == CLASSICAL:
        return p, log_z
    rho = (vecs * p) @ vecs.conj().T
    return 0.5 * (rho + rho.conj().T), log_z


def _means(rho, gens_list, backend):
    if backend == CLASSICAL:
        return np.array([float(np.dot(rho, g)) for g in gens_list])
    return np.array([float(np.einsum("ij,ji->", rho, g).real) for g in gens_list])


def _spread(g: np.ndarray, backend: str) -> tuple[float, float]:
    lam = g if backend == CLASSICAL else np.linalg.eigvalsh(g)
    return float(np.min(lam)), float(np.max(lam))


def log_partition(gens: GeneratorSet, beta: float, nu: Sequence[float] = ()) -> float:
    """``ln Tr exp(-beta H + sum_i nu_i N_i)``."""
    k = -beta * gens.hamiltonian
    for c, n in zip(nu, gens.conserved):
        k = k + c * n
    return _gibbs(k, gens.backend)[1]


def _solve_dual(generators, targets, backend, max_iter=MAX_ITER, tol=MEAN_TOL):
    """Newton on the dual with signed generators ``g = (-H, N_1, ...)``.

    Returns ``(rho, theta, log_z, iterations)`` with ``theta = (beta, nu...)``.
    Generators with zero spread are held at multiplier zero after checking
    that their target equals their (single) eigenvalue.
    """
    dim = np.shape(generators[0])[0]
    signs = np.array([-1.0] + [1.0] * (len(generators) - 1))
    active = []
    for i, (g, t) in enumerate(zip(generators, targets)):
        lo, hi = _spread(g, backend)
        width = hi - lo
        scale = max(1.0, abs(lo), abs(hi))
        if width <= 1e-12 * scale:
            if abs(t - lo) > 1e-9 * scale:
                raise AttainabilityError(
                    f"generator {i} is constant ({lo!r}) but target is {float(t)!r}")
            continue
        if not lo < t < hi:
            raise AttainabilityError(
                f"target {float(t)!r} for generator {i} outside open range ({lo!r}, {hi!r})")
        active.append(i)

    g_act = [signs[i] * generators[i] for i in active]
    t_act = np.array([signs[i] * targets[i] for i in active])
    theta = np.zeros(len(active))
    zero = np.zeros((dim, dim), dtype=complex) if backend == QUANTUM else np.zeros(dim)

    def evaluate(th):
        k = zero.copy()
        for c, g in zip(th, g_act):
            k = k + c * g
        rho, log_z = _gibbs(k, backend)
        return rho, log_z, log_z - float(np.dot(th, t_act))

    rho, log_z, phi = evaluate(theta)
    scale = np.maximum(1.0, np.abs(t_act))
    iterations = 0
    for iterations in range(1, max_iter + 1):
        means = _means(rho, g_act, backend)
        grad = means - t_act
        if not len(active) or np.max(np.abs(grad) / scale) <= 1e-3 * tol:
            break
        cov = _covariance(rho, g_act, means, backend)
        step, *_ = np.linalg.lstsq(cov, -grad, rcond=1e-13)
        slope = float(np.dot(grad, step))
        if slope >= 0:
            step, slope = -grad, -float(np.dot(grad, grad))
        s = 1.0
        # near the optimum the predicted decrease drops below the rounding of phi
        noise = 64 * np.finfo(float).eps * max(1.0, abs(phi))
        while True:
            cand = evaluate(theta + s * step)
            if cand[2] <= phi + ARMIJO * s * slope + noise or s < 1e-12:
                break
            s *= 0.5
        theta = theta + s * step
        rho, log_z, phi = cand
    else:
        grad = _means(rho, g_act, backend) - t_act
        raise MaxEntConvergenceError(
            f"Newton did not converge in {max_iter} iterations "
            f"(max residual {np.max(np.abs(grad)):.3e})", grad)
    full = np.zeros(len(generators))
    full[active] = theta
    return rho, full, log_z, iterations


def _covariance(rho, g_act, means, backend):
    n = len(g_act)
    cov = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            if backend == CLASSICAL:
                second = float(np.dot(rho, g_act[i] * g_act[j]))
            else:
                prod = g_act[i] @ g_act[j]
                second = float(np.einsum("ij,ji->", rho, 0.5 * (prod + prod.conj().T)).real)
            cov[i, j] = cov[j, i] = second - means[i] * means[j]
    return cov


def maxent_state(gens: GeneratorSet, target: ConstraintTarget,
                 max_iter: int = MAX_ITER) -> tuple[StateMatrix, DualParams]:
    """The entropy maximiser ``exp(-alpha) exp(-beta H + sum nu_i N_i)`` with the given means.

    Raises :class:`AttainabilityError` for targets outside the open range of a
    generator and :class:`MaxEntConvergenceError` if Newton stalls.
    """
    targets = target.values
    if len(targets) != len(gens.generators):
        raise ValueError(f"target has {len(targets)} values for {len(gens.generators)} generators")
    rho, theta, log_z, it = _solve_dual(gens.generators, targets, gens.backend, max_iter)
    state = StateMatrix.from_array(rho, gens.backend)
    return state, DualParams(float(log_z), float(theta[0]), tuple(float(x) for x in theta[1:]),
                             None, it)


def _range_basis(b: np.ndarray, backend: str) -> np.ndarray:
    if backend == CLASSICAL:
        return np.flatnonzero(b > 0.5)
    lam, vecs = np.linalg.eigh(b)
    return vecs[:, lam > 0.5]


def check_projector(b: np.ndarray, gens: GeneratorSet) -> np.ndarray:
    """Validate ``B`` (Hermitian, idempotent, commuting with every generator)."""
    backend = gens.backend
    b = np.asarray(b)
    if backend == CLASSICAL:
        if b.ndim == 2:
            b = np.diag(b)
        b = np.real(b).astype(float)
        if np.max(np.abs(b * b - b)) > B_TOL:
            raise StateError("B is not idempotent")
        return b
    b = np.asarray(b, dtype=complex)
    if np.max(np.abs(b - b.conj().T)) > B_TOL:
        raise StateError("B is not Hermitian")
    if np.linalg.norm(b @ b - b) > B_TOL:
        raise StateError("B is not idempotent (||B^2 - B|| too large)")
    for i, g in enumerate(gens.generators):
        if np.linalg.norm(b @ g - g @ b) > B_TOL * max(1.0, np.linalg.norm(g)):
            raise StateError(f"B does not commute with generator {i}")
    return b


def partial_canonical_state(b: np.ndarray, gens: GeneratorSet, target: ConstraintTarget,
                            max_iter: int = MAX_ITER) -> tuple[StateMatrix, DualParams]:
    """``exp(-a) B exp(-b H + sum c_i N_i) B`` with the given means.

    ``B`` must be an orthogonal projector commuting with ``H`` and every
    ``N_i``; the problem is then a canonical one on the range of ``B``. With
    ``B = I`` the result is exactly :func:`maxent_state`.
    """
    backend = gens.backend
    b = check_projector(b, gens)
    dim = gens.dim
    ident = np.ones(dim) if backend == CLASSICAL else np.eye(dim)
    if np.max(np.abs(b - ident)) <= B_TOL:
        return maxent_state(gens, target, max_iter)
    basis = _range_basis(b, backend)
    if np.size(basis) == 0:
        raise StateError("B is the zero projector")
    if backend == CLASSICAL:
        restricted = [g[basis] for g in gens.generators]
    else:
        restricted = [basis.conj().T @ g @ basis for g in gens.generators]
    rho_sub, theta, log_z, it = _solve_dual(restricted, target.values, backend, max_iter)
    if backend == CLASSICAL:
        rho = np.zeros(dim)
        rho[basis] = rho_sub
    else:
        rho = basis @ rho_sub @ basis.conj().T
    state = StateMatrix.from_array(rho, backend)
    return state, DualParams(float(log_z), float(theta[0]), tuple(float(x) for x in theta[1:]),
                             b, it)


def constraint_residual(rho: StateMatrix, gens: GeneratorSet, target: ConstraintTarget) -> np.ndarray:
    """``[Tr rho - 1, <H> - target, <N_i> - target_i, ...]``."""
    tr = float(np.real(np.sum(rho.entries) if rho.backend == CLASSICAL else np.trace(rho.entries)))
    means = [mean_value(rho, g) for g in gens.generators]
    return np.array([tr - 1.0] + [m - t for m, t in zip(means, target.values)])
