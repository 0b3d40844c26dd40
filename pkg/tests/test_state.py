import math

import numpy as np
import pytest
from conftest import random_unitary, seeds, small_dims
from hypothesis import given
from hypothesis import strategies as st

from sea.fixtures import random_state
from sea.state import (
    CLASSICAL,
    QUANTUM,
    GeneratorSet,
    PhysicalConstants,
    StateError,
    StateMatrix,
    diag_state,
    entropy,
    inner_product,
    maximally_mixed,
    mean_value,
    pure_state,
    spectral_function,
    sqrt_and_log,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])


def test_inner_product_examples():
    assert inner_product(np.eye(2), np.eye(2)) == 2.0
    assert inner_product(np.diag([1.0, -1.0]), np.eye(2)) == 0.0
    assert inner_product(SX, SY) == 0.0
    assert inner_product(np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0


def test_inner_product_dimension_mismatch():
    with pytest.raises(StateError):
        inner_product(np.eye(2), np.eye(3))


def test_entropy_examples():
    assert entropy(diag_state([1.0, 0.0])) == 0.0
    assert entropy(maximally_mixed(2)) == pytest.approx(math.log(2), abs=1e-15)
    assert entropy(diag_state([0.75, 0.25])) == pytest.approx(0.562335144618808, abs=1e-12)
    assert entropy(diag_state([0.75, 0.25]), k=2.0) == pytest.approx(2 * 0.562335144618808, abs=1e-12)


def test_mean_value_examples():
    x = np.diag([0.0, 1.0])
    assert mean_value(maximally_mixed(2), x) == pytest.approx(0.5)
    assert mean_value(diag_state([1.0, 0.0]), x) == 0.0
    rho = StateMatrix.from_array(np.array([[0.5, 0.2], [0.2, 0.5]]))
    assert mean_value(rho, SX) == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(StateError):
        mean_value(rho, np.eye(3))


def test_sqrt_and_log_examples():
    _, rl, p = sqrt_and_log(diag_state([1.0, 0.0]))
    assert np.all(rl == 0)
    assert np.allclose(p, np.diag([1, 0]))
    _, rl, _ = sqrt_and_log(maximally_mixed(2))
    assert np.allclose(rl, -math.log(2) / math.sqrt(2) * np.eye(2), atol=1e-15)
    _, rl, _ = sqrt_and_log(diag_state([0.25, 0.75]))
    assert np.allclose(np.diag(rl).real, [0.5 * math.log(0.25), math.sqrt(0.75) * math.log(0.75)], atol=1e-15)
    # sqrt(0.75) ln(0.75) = -0.2491399...
    assert np.allclose(np.diag(rl).real, [-0.693147, -0.249140], atol=1e-6)


def test_state_validation_rejects_bad_input():
    with pytest.raises(StateError, match="Hermitian"):
        StateMatrix.from_array(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(StateError, match="negative"):
        StateMatrix.from_array(np.diag([1.1, -0.1]))
    with pytest.raises(StateError, match="trace"):
        diag_state([0.6, 0.6])
    with pytest.raises(StateError):
        StateMatrix.from_array(np.ones((2, 3)))
    with pytest.raises(StateError, match="backend"):
        StateMatrix.from_array(np.eye(2) / 2, "bogus")


def test_classical_backend_matches_diagonal_quantum():
    p = [0.5, 0.3, 0.2]
    c, q = diag_state(p, CLASSICAL), diag_state(p, QUANTUM)
    assert entropy(c) == pytest.approx(entropy(q), abs=1e-15)
    x = np.array([1.0, -2.0, 0.5])
    assert mean_value(c, x) == pytest.approx(mean_value(q, np.diag(x)), abs=1e-15)
    _, rl_c, _ = sqrt_and_log(c)
    _, rl_q, _ = sqrt_and_log(q)
    assert np.allclose(rl_c, np.diag(rl_q).real, atol=1e-15)


def test_generator_set_validation():
    h = np.diag([0.0, 1.0, 2.0])
    GeneratorSet.from_arrays(h, [np.diag([1.0, 1.0, 0.0])])
    with pytest.raises(StateError, match="commute"):
        GeneratorSet.from_arrays(h, [np.ones((3, 3))])
    with pytest.raises(StateError, match="Hermitian"):
        GeneratorSet.from_arrays(np.array([[0, 1], [0, 0]]))
    with pytest.raises(StateError, match="shape"):
        GeneratorSet.from_arrays(h, [np.eye(2)])
    gens = GeneratorSet.from_arrays(np.array([0.0, 1.0]))
    assert gens.backend == CLASSICAL and gens.dim == 2


def test_physical_constants_positive():
    with pytest.raises(ValueError):
        PhysicalConstants(tau=0.0)


def test_support_and_rank():
    # eigenvalues at or below 1e-12 * lambda_max count as exact zeros
    rho = diag_state([0.5, 0.5, 0.0, 1e-14 / 2])
    assert rho.dim == 4 and rho.rank == 2
    assert entropy(rho) == pytest.approx(math.log(2), abs=1e-15)
    assert diag_state([0.5, 0.5 - 1e-9, 1e-9]).rank == 3


def test_pure_state_rank_one():
    rho = pure_state([1, 1j, 0])
    assert rho.rank == 1
    assert entropy(rho) == pytest.approx(0.0, abs=1e-15)


@given(seeds, small_dims)
def test_inner_product_nonnegative(seed, d):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    a = a + a.conj().T
    assert inner_product(a, a) >= 0
    assert inner_product(a, a) == pytest.approx(np.linalg.norm(a) ** 2, rel=1e-12)


@given(seeds, st.sampled_from([2, 3, 4, 8]))
def test_entropy_unitary_invariance(seed, d):
    rng = np.random.default_rng(seed)
    rho = random_state(d, rng)
    u = random_unitary(d, rng)
    rotated = StateMatrix.from_array(u @ rho.entries @ u.conj().T)
    assert abs(entropy(rotated) - entropy(rho)) <= 1e-10


@given(seeds, small_dims, st.integers(1, 4))
def test_sqrt_and_log_identities(seed, d, rank):
    rng = np.random.default_rng(seed)
    rho = random_state(d, rng, rank=min(rank, d))
    root, root_log, proj = sqrt_and_log(rho)
    assert np.linalg.norm(root @ root - rho.entries) <= 1e-10
    rho_log = spectral_function(rho, lambda x: x * np.log(x))
    assert np.linalg.norm(root @ root_log - rho_log) <= 1e-8
    assert entropy(rho) == pytest.approx(-inner_product(root, root_log), abs=1e-10)
    assert np.linalg.norm(proj @ proj - proj) <= 1e-10
    assert -1e-15 <= entropy(rho) <= math.log(d) + 1e-12


@given(seeds, small_dims)
def test_entropy_bounds_classical(seed, d):
    rng = np.random.default_rng(seed)
    p = random_state(d, rng, CLASSICAL)
    assert -1e-15 <= entropy(p) <= math.log(d) + 1e-12
