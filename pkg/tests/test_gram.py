import numpy as np
import pytest
from conftest import seeds, small_dims
from hypothesis import given
from hypothesis import strategies as st

from sea.fixtures import commuting_observable, random_hamiltonian, random_state
from sea.gram import (
    ProjectionConditioningError,
    build_gram,
    gram_system,
    laplace_det,
    project,
    project_cramer,
    projection_coefficients,
    select_li_basis,
)
from sea.state import (
    CLASSICAL,
    QUANTUM,
    GeneratorSet,
    diag_state,
    inner_product,
    maximally_mixed,
    sqrt_rho,
)


def _random_elements(rng, d, m, backend=QUANTUM):
    if backend == CLASSICAL:
        return [rng.normal(size=d) for _ in range(m)]
    return [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(m)]


def test_duplicate_identity_element():
    gs = build_gram(maximally_mixed(2), GeneratorSet.from_arrays(np.eye(2)))
    assert np.allclose(gs.gram, [[1, 1], [1, 1]], atol=1e-15)
    assert gs.det == pytest.approx(0.0, abs=1e-15)
    assert gs.li_indices == (0,)


def test_vanishing_weighted_generator():
    gs = build_gram(diag_state([1.0, 0.0]), GeneratorSet.from_arrays(np.diag([0.0, 1.0])))
    assert np.allclose(gs.gram, [[1, 0], [0, 0]])
    assert gs.rank == 1


def test_gram_matches_anticommutator_trace(rng):
    d = 3
    rho = random_state(d, rng)
    h = random_hamiltonian(d, rng)
    gs = build_gram(rho, GeneratorSet.from_arrays(h))
    r = [np.eye(d), h]
    for j in range(2):
        for k in range(2):
            ref = 0.5 * np.trace(rho.entries @ (r[j] @ r[k] + r[k] @ r[j])).real
            assert gs.gram[j, k] == pytest.approx(ref, abs=1e-12)


def test_select_orthogonal_elements_all_kept():
    elems = [np.diag([1.0, 0, 0]), np.diag([0, 2.0, 0]), np.diag([0, 0, 3.0])]
    gs = gram_system(elems, QUANTUM)
    assert select_li_basis(gs) == [0, 1, 2]


def test_select_proportional_generator_dropped():
    gs = build_gram(random_state(3, np.random.default_rng(1)), GeneratorSet.from_arrays(2.5 * np.eye(3)))
    assert gs.li_indices == (0,)


def test_select_duplicate_conserved_dropped(rng):
    h = random_hamiltonian(4, rng)
    gs = build_gram(random_state(4, rng), GeneratorSet.from_arrays(h, [h]))
    assert gs.li_indices == (0, 1)
    # the dropped element lies in the selected span
    resid = gs.elements[2] - project(gs.elements[2], gs)
    assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(gs.elements[2])


def test_project_examples(rng):
    rho = random_state(3, rng)
    gens = GeneratorSet.from_arrays(random_hamiltonian(3, rng))
    gs = build_gram(rho, gens)
    root = sqrt_rho(rho)
    assert np.allclose(project(root, gs), root, atol=1e-14)
    # a direction orthogonal to both basis elements
    v = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    v = v - project(v, gs)
    assert np.linalg.norm(project(v, gs)) <= 1e-13


def test_cramer_single_element(rng):
    e = rng.normal(size=(2, 2))
    v = rng.normal(size=(2, 2))
    gs = gram_system([e], QUANTUM)
    expect = inner_product(v, e) / inner_product(e, e) * e
    assert np.allclose(project_cramer(v, gs), expect, atol=1e-14)
    w = v - expect
    assert np.linalg.norm(project_cramer(w, gs)) <= 1e-13


def test_cramer_two_elements_matches_lstsq(rng):
    elems = _random_elements(rng, 2, 2)
    v = _random_elements(rng, 2, 1)[0]
    gs = gram_system(elems, QUANTUM)
    # least squares over the real span of the two complex matrices
    a = np.column_stack([np.concatenate([e.real.ravel(), e.imag.ravel()]) for e in elems])
    b = np.concatenate([v.real.ravel(), v.imag.ravel()])
    c, *_ = np.linalg.lstsq(a, b, rcond=None)
    expect = c[0] * elems[0] + c[1] * elems[1]
    assert np.allclose(project_cramer(v, gs), expect, atol=1e-12)


def test_cramer_basis_limit(rng):
    elems = [np.eye(8)[i][:, None] * np.eye(8)[i][None, :] for i in range(7)]
    gs = gram_system(elems, QUANTUM)
    with pytest.raises(ValueError, match="limited"):
        project_cramer(np.eye(8), gs)


def test_laplace_det_matches_numpy(rng):
    for n in range(1, 6):
        m = rng.normal(size=(n, n))
        assert laplace_det(m) == pytest.approx(np.linalg.det(m), rel=1e-10, abs=1e-12)


def test_conditioning_error():
    e1 = np.diag([1.0, 0.0])
    e2 = np.diag([1.0, 1e-7])
    gs = gram_system([e1, e2], QUANTUM, pivot_tol=1e-20, scales=[1.0, 1.0])
    assert gs.rank == 2
    with pytest.raises(ProjectionConditioningError, match="pivot_tol"):
        projection_coefficients(np.eye(2), gs)


def test_mismatched_generators_rejected():
    with pytest.raises(ValueError):
        build_gram(maximally_mixed(2), GeneratorSet.from_arrays(np.eye(3)))


@given(seeds, small_dims, st.integers(1, 3), st.sampled_from([QUANTUM, CLASSICAL]))
def test_projection_idempotent_and_pythagoras(seed, d, m, backend):
    rng = np.random.default_rng(seed)
    gs = gram_system(_random_elements(rng, d, m, backend), backend)
    v = _random_elements(rng, d, 1, backend)[0]
    p = project(v, gs)
    assert np.linalg.norm(project(p, gs) - p) <= 1e-10 * max(1.0, np.linalg.norm(p))
    r = v - p
    lhs = inner_product(v, v, backend)
    rhs = inner_product(p, p, backend) + inner_product(r, r, backend)
    assert lhs == pytest.approx(rhs, rel=1e-9)
    for e in gs.basis:
        assert abs(inner_product(r, e, backend)) <= 1e-10 * np.linalg.norm(e) * np.linalg.norm(v)


@given(seeds, small_dims, st.floats(-5, 5))
def test_projection_basis_choice_independence(seed, d, c):
    rng = np.random.default_rng(seed)
    rho = random_state(d, rng)
    h = random_hamiltonian(d, rng)
    v = _random_elements(rng, d, 1)[0]
    a = project(v, build_gram(rho, GeneratorSet.from_arrays(h)))
    b = project(v, build_gram(rho, GeneratorSet.from_arrays(h + c * np.eye(d))))
    assert np.linalg.norm(a - b) <= 1e-9 * max(1.0, np.linalg.norm(v))


@given(seeds, small_dims, st.integers(1, 4))
def test_gram_properties(seed, d, rank):
    rng = np.random.default_rng(seed)
    rho = random_state(d, rng, rank=min(rank, d))
    h = random_hamiltonian(d, rng)
    gens = GeneratorSet.from_arrays(h, [commuting_observable(h, rng)])
    gs = build_gram(rho, gens)
    m = gs.gram
    assert np.allclose(m, m.T)
    assert np.linalg.eigvalsh(m).min() >= -1e-10 * np.linalg.norm(m)
    assert gs.det >= -1e-12
    assert 0 in gs.li_indices
    assert np.linalg.det(gs.basis_gram) > 0
    for i, e in enumerate(gs.elements):
        if i in gs.li_indices:
            continue
        n = np.linalg.norm(e)
        assert np.linalg.norm(e - project(e, gs)) <= 1e-8 * n


@given(seeds, st.integers(2, 4), st.integers(1, 4))
def test_project_matches_cramer(seed, d, m):
    rng = np.random.default_rng(seed)
    gs = gram_system(_random_elements(rng, d, m), QUANTUM)
    v = _random_elements(rng, d, 1)[0]
    assert np.linalg.norm(project(v, gs) - project_cramer(v, gs)) <= 1e-10 * max(1.0, np.linalg.norm(v))
