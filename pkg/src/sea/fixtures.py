"""Seeded random fixtures: Hamiltonians, commuting observables, states."""

from __future__ import annotations

import numpy as np

from .state import CLASSICAL, QUANTUM, GeneratorSet, StateMatrix


def random_hamiltonian(d: int, rng: np.random.Generator, backend: str = QUANTUM,
                       scale: float = 1.0) -> np.ndarray:
    """GUE-like Hermitian matrix (or a real vector for the classical backend)."""
    if backend == CLASSICAL:
        return scale * rng.normal(size=d)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def commuting_observable(h: np.ndarray, rng: np.random.Generator, levels: int = 3) -> np.ndarray:
    """An observable diagonal in an eigenbasis of ``h`` with small integer eigenvalues."""
    h = np.asarray(h)
    vals = rng.integers(0, levels, size=h.shape[0]).astype(float)
    if h.ndim == 1:
        return vals
    _, vecs = np.linalg.eigh(h)
    n = (vecs * vals) @ vecs.conj().T
    return 0.5 * (n + n.conj().T)


def random_state(d: int, rng: np.random.Generator, backend: str = QUANTUM,
                 rank: int | None = None) -> StateMatrix:
    """Random state of the given rank (full rank by default)."""
    rank = d if rank is None else rank
    if not 1 <= rank <= d:
        raise ValueError(f"rank must lie in [1, {d}]")
    if backend == CLASSICAL:
        p = np.zeros(d)
        idx = rng.permutation(d)[:rank]
        p[idx] = rng.dirichlet(np.ones(rank))
        return StateMatrix.from_array(p, CLASSICAL)
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    r = g @ g.conj().T
    r = r / np.trace(r).real
    return StateMatrix.from_array(0.5 * (r + r.conj().T), QUANTUM)


def random_generators(d: int, rng: np.random.Generator, backend: str = QUANTUM,
                      n_conserved: int = 0) -> GeneratorSet:
    h = random_hamiltonian(d, rng, backend)
    conserved = [commuting_observable(h, rng) for _ in range(n_conserved)]
    return GeneratorSet.from_arrays(h, conserved, backend)
