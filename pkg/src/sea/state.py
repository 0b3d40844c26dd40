"""States, observables, generator sets and the primitive functionals on them.

Two backends share one vocabulary:

* ``"quantum"`` -- dense Hermitian ``(d, d)`` complex arrays, real inner
  product ``(A|B) = Re Tr(A^dagger B)``;
* ``"classical"`` -- diagonal matrices stored as real ``(d,)`` vectors,
  inner product ``sum_j a_j b_j``.

Observables are plain numpy arrays; only states carry a wrapper type because
they own a cached spectral decomposition.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

QUANTUM = "quantum"
CLASSICAL = "classical"
BACKENDS = (QUANTUM, CLASSICAL)

EPS_RANK = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
COMMUTE_TOL = 1e-10


class StateError(ValueError):
    """Raised when an array does not represent a valid state or observable."""


def infer_backend(a: np.ndarray) -> str:
    a = np.asarray(a)
    if a.ndim == 1:
        return CLASSICAL
    if a.ndim == 2 and a.shape[0] == a.shape[1]:
        return QUANTUM
    raise StateError(f"cannot infer backend from array of shape {a.shape}")


def _check_backend(backend: str) -> None:
    if backend not in BACKENDS:
        raise StateError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def hermitian_defect(a: np.ndarray) -> float:
    """Largest entrywise deviation ``|a_jk - conj(a_kj)|``."""
    a = np.asarray(a)
    if a.ndim == 1:
        return float(np.max(np.abs(a.imag))) if np.iscomplexobj(a) else 0.0
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def as_observable(a, backend: str | None = None, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate and normalise an observable to the canonical array form.

    Quantum observables become complex ``(d, d)`` arrays, classical ones real
    ``(d,)`` vectors. A square diagonal matrix is accepted for the classical
    backend and reduced to its diagonal.
    """
    a = np.asarray(a)
    if backend is None:
        backend = infer_backend(a)
    _check_backend(backend)
    if backend == CLASSICAL:
        if a.ndim == 2:
            if a.shape[0] != a.shape[1] or np.any(np.abs(a - np.diag(np.diag(a))) > tol):
                raise StateError("classical observables must be diagonal")
            a = np.diag(a)
        if a.ndim != 1:
            raise StateError(f"classical observable must be a vector, got shape {a.shape}")
        if np.iscomplexobj(a):
            if np.max(np.abs(a.imag), initial=0.0) > tol:
                raise StateError("classical observables must be real")
            a = a.real
        return np.array(a, dtype=float)
    if a.ndim == 1:
        a = np.diag(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StateError(f"quantum observable must be square, got shape {a.shape}")
    a = np.array(a, dtype=complex)
    defect = hermitian_defect(a)
    if defect > tol:
        raise StateError(f"observable is not Hermitian (defect {defect:.3e})")
    return a


def _dim(a: np.ndarray) -> int:
    return int(np.shape(a)[0])


def inner_product(a: np.ndarray, b: np.ndarray, backend: str | None = None) -> float:
    """Real inner product ``Tr(A^dagger B + B^dagger A) / 2``.

    Works for any (not necessarily Hermitian) square matrices in the quantum
    backend and reduces to ``sum_j a_j b_j`` for classical vectors.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if backend is None:
        backend = infer_backend(a)
    if a.shape != b.shape:
        raise StateError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if backend == CLASSICAL:
        return float(np.dot(a.real, b.real))
    return float(np.vdot(a, b).real)


def norm(a: np.ndarray, backend: str | None = None) -> float:
    return float(np.sqrt(max(inner_product(a, a, backend), 0.0)))


def matmul(a: np.ndarray, b: np.ndarray, backend: str) -> np.ndarray:
    """Product in the algebra of the backend (elementwise for diagonals)."""
    if backend == CLASSICAL:
        return a * b
    return a @ b


def dagger(a: np.ndarray, backend: str) -> np.ndarray:
    if backend == CLASSICAL:
        return a
    return a.conj().T


def identity(dim: int, backend: str) -> np.ndarray:
    if backend == CLASSICAL:
        return np.ones(dim)
    return np.eye(dim, dtype=complex)


def trace(a: np.ndarray, backend: str | None = None) -> complex:
    a = np.asarray(a)
    if backend is None:
        backend = infer_backend(a)
    return a.sum() if backend == CLASSICAL else np.trace(a)


@dataclass(frozen=True)
class PhysicalConstants:
    """Units of entropy (k), action (hbar) and the relaxation time tau."""

    k: float = 1.0
    hbar: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        for name in ("k", "hbar", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True, eq=False)
class StateMatrix:
    """A density matrix (quantum) or probability vector (classical).

    The spectral decomposition is computed lazily, once, and every matrix
    function of the state goes through it. Eigenvalues are sorted in
    descending order; those at or below ``eps_rank * max(eigenvalue)`` count
    as exact zeros.
    """

    entries: np.ndarray
    backend: str
    eps_rank: float = EPS_RANK
    _spectrum: tuple | None = field(default=None, repr=False, compare=False)
    # at most this many leading eigenvalues count as support (None: no cap)
    max_rank: int | None = None

    @classmethod
    def from_array(cls, a, backend: str | None = None, *, check: bool = True,
                   eps_rank: float = EPS_RANK) -> "StateMatrix":
        a = np.asarray(a)
        if backend is None:
            backend = infer_backend(a)
        _check_backend(backend)
        entries = as_observable(a, backend, tol=HERMITIAN_TOL if check else np.inf)
        if backend == QUANTUM:
            entries = 0.5 * (entries + entries.conj().T)
        state = cls(entries, backend, eps_rank)
        if check:
            state.validate()
        return state

    @classmethod
    def from_spectrum(cls, eigenvalues: np.ndarray, eigenvectors: np.ndarray | None,
                      backend: str, eps_rank: float = EPS_RANK) -> "StateMatrix":
        """Build a state from a known decomposition (quantum) or vector (classical)."""
        eigenvalues = np.asarray(eigenvalues, dtype=float)
        if backend == CLASSICAL:
            return cls(eigenvalues.copy(), backend, eps_rank)
        order = np.argsort(eigenvalues)[::-1]
        lam = eigenvalues[order]
        vecs = np.asarray(eigenvectors)[:, order]
        entries = (vecs * lam) @ vecs.conj().T
        entries = 0.5 * (entries + entries.conj().T)
        return cls(entries, backend, eps_rank, (lam, vecs))

    @property
    def dim(self) -> int:
        return _dim(self.entries)

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray | None]:
        """``(eigenvalues, eigenvectors)`` with eigenvalues descending.

        For the classical backend the "eigenvectors" slot holds the
        permutation that sorts the probability vector.
        """
        if self._spectrum is not None:
            return self._spectrum
        if self.backend == CLASSICAL:
            order = np.argsort(self.entries)[::-1]
            return self.entries[order], order
        lam, vecs = np.linalg.eigh(self.entries)
        return lam[::-1].copy(), vecs[:, ::-1].copy()

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum[0]

    @property
    def threshold(self) -> float:
        return self.eps_rank * max(1e-300, float(self.eigenvalues[0]))

    @cached_property
    def support(self) -> np.ndarray:
        """Boolean mask over the (descending) eigenvalues that form the support."""
        mask = self.eigenvalues > self.threshold
        if self.max_rank is not None:
            mask[self.max_rank:] = False
        return mask

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.support))

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])

    def validate(self) -> None:
        if self.backend == QUANTUM:
            defect = hermitian_defect(self.entries)
            if defect > HERMITIAN_TOL:
                raise StateError(f"state is not Hermitian (defect {defect:.3e})")
        lam_max = float(self.eigenvalues[0])
        if self.min_eigenvalue < -self.eps_rank * max(1.0, lam_max):
            raise StateError(f"state has negative eigenvalue {self.min_eigenvalue:.3e}")
        tr = float(np.real(trace(self.entries, self.backend)))
        if abs(tr - 1.0) > TRACE_TOL:
            raise StateError(f"state trace is {tr!r}, expected 1")

    def as_matrix(self) -> np.ndarray:
        """Dense matrix form (diagonal matrix for the classical backend)."""
        if self.backend == CLASSICAL:
            return np.diag(self.entries).astype(complex)
        return self.entries

    def __repr__(self) -> str:
        return f"StateMatrix(backend={self.backend!r}, dim={self.dim}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """The generators of motion: a Hamiltonian and conserved observables.

    In the quantum backend every conserved observable must commute with the
    Hamiltonian, ``||[H, N_i]||_F <= 1e-10 ||H||_F ||N_i||_F``.
    """

    hamiltonian: np.ndarray
    conserved: tuple = ()
    backend: str = QUANTUM

    def __post_init__(self):
        _check_backend(self.backend)
        h = as_observable(self.hamiltonian, self.backend)
        ns = tuple(as_observable(n, self.backend) for n in self.conserved)
        for n in ns:
            if n.shape != h.shape:
                raise StateError(f"generator shape {n.shape} does not match H {h.shape}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "conserved", ns)
        if self.backend == QUANTUM:
            for i, n in enumerate(ns):
                comm = np.linalg.norm(h @ n - n @ h)
                bound = COMMUTE_TOL * np.linalg.norm(h) * np.linalg.norm(n)
                if comm > bound and comm > 1e-14:
                    raise StateError(f"conserved generator N_{i + 1} does not commute with H "
                                     f"(||[H, N]|| = {comm:.3e})")

    @classmethod
    def from_arrays(cls, hamiltonian, conserved: Sequence = (), backend: str | None = None):
        if backend is None:
            backend = infer_backend(np.asarray(hamiltonian))
        return cls(np.asarray(hamiltonian), tuple(np.asarray(n) for n in conserved), backend)

    @property
    def dim(self) -> int:
        return _dim(self.hamiltonian)

    @property
    def generators(self) -> tuple:
        """``(H, N_1, ..., N_r)``."""
        return (self.hamiltonian,) + self.conserved

    def digest(self) -> str:
        h = hashlib.sha256(self.backend.encode())
        for g in self.generators:
            h.update(np.ascontiguousarray(g).tobytes())
        return h.hexdigest()[:16]


def entropy(rho: StateMatrix, k: float = 1.0) -> float:
    """``-k sum_j lambda_j ln lambda_j`` with ``0 ln 0 = 0``."""
    lam = rho.eigenvalues[rho.support]
    return float(-k * np.sum(lam * np.log(lam)))


def mean_value(rho: StateMatrix, x: np.ndarray) -> float:
    """``Tr(rho X)``."""
    x = np.asarray(x)
    if rho.backend == CLASSICAL:
        x = as_observable(x, CLASSICAL, tol=np.inf)
        if x.shape != rho.entries.shape:
            raise StateError(f"dimension mismatch: {x.shape} vs {rho.entries.shape}")
        return float(np.dot(rho.entries, x))
    if x.shape != rho.entries.shape:
        raise StateError(f"dimension mismatch: {x.shape} vs {rho.entries.shape}")
    return float(np.einsum("ij,ji->", rho.entries, x).real)


def mean_values(rho: StateMatrix, gens: GeneratorSet) -> np.ndarray:
    return np.array([mean_value(rho, g) for g in gens.generators])


def spectral_function(rho: StateMatrix, fn) -> np.ndarray:
    """Apply ``fn`` to the support eigenvalues; kernel eigenvalues map to 0."""
    lam, vecs = rho.spectrum
    support = rho.support
    vals = np.zeros_like(lam)
    vals[support] = fn(lam[support])
    if rho.backend == CLASSICAL:
        out = np.empty_like(vals)
        out[vecs] = vals
        return out
    return (vecs * vals) @ vecs.conj().T


def sqrt_and_log(rho: StateMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(sqrt(rho), sqrt(rho) ln(rho), P_support)``.

    ``sqrt(lambda) ln(lambda)`` is set to zero on eigenvalues at or below the
    rank threshold.
    """
    return (
        spectral_function(rho, np.sqrt),
        spectral_function(rho, lambda x: np.sqrt(x) * np.log(x)),
        spectral_function(rho, np.ones_like),
    )


def sqrt_rho(rho: StateMatrix) -> np.ndarray:
    return spectral_function(rho, np.sqrt)


def clean_state(a: np.ndarray, backend: str, eps_rank: float = EPS_RANK,
                renormalize: bool = True) -> StateMatrix:
    """Repair integrator drift: Hermitize, clip tiny/negative eigenvalues, renormalise."""
    if backend == CLASSICAL:
        p = np.array(np.real(a), dtype=float)
        p[p <= eps_rank * max(p.max(), 1e-300)] = 0.0
        if renormalize:
            p /= p.sum()
        return StateMatrix(p, CLASSICAL, eps_rank)
    a = 0.5 * (a + a.conj().T)
    lam, vecs = np.linalg.eigh(a)
    lam = lam.copy()
    lam[lam <= eps_rank * max(lam.max(), 1e-300)] = 0.0
    if renormalize:
        lam /= lam.sum()
    return StateMatrix.from_spectrum(lam, vecs, QUANTUM, eps_rank)


def diag_state(p: Sequence[float], backend: str = QUANTUM) -> StateMatrix:
    p = np.asarray(p, dtype=float)
    if backend == CLASSICAL:
        return StateMatrix.from_array(p, CLASSICAL)
    return StateMatrix.from_array(np.diag(p).astype(complex), QUANTUM)


def pure_state(vector: Sequence[complex]) -> StateMatrix:
    v = np.asarray(vector, dtype=complex)
    v = v / np.linalg.norm(v)
    return StateMatrix.from_array(np.outer(v, v.conj()), QUANTUM)


def maximally_mixed(dim: int, backend: str = QUANTUM) -> StateMatrix:
    return diag_state(np.full(dim, 1.0 / dim), backend)
