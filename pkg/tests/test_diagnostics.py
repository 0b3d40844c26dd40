import dataclasses
import json
import math

import numpy as np
import pytest
from conftest import seeds
from hypothesis import given, settings
from hypothesis import strategies as st

from sea import highprec
from sea.composite import CompositeSystem, composite_entropy_production
from sea.diagnostics import (
    ProbeInfeasible,
    Tolerances,
    check_invariants,
    entropy_rate_fd,
    frobenius_distance,
    instability_probe,
)
from sea.dynamics import IntegratorOptions, entropy_production, evolve
from sea.fixtures import commuting_observable, random_hamiltonian, random_state
from sea.maxent import ConstraintTarget, maxent_state
from sea.state import CLASSICAL, GeneratorSet, diag_state, entropy, pure_state

LADDER = GeneratorSet.from_arrays(np.diag([0.0, 1.0, 2.0]))


def _relaxation(t_end=5.0):
    return evolve(diag_state([0.5, 0.1, 0.4]), LADDER, opts=IntegratorOptions(t_end=t_end))


def test_relaxation_passes_all_checks():
    report = check_invariants(_relaxation())
    assert report.passed, report.failures()
    names = [c.check_name for c in report.checks]
    assert names == ["state_set_nonnegative", "state_set_hermitian", "conservation_trace",
                     "conservation_mean_H", "entropy_monotonicity", "entropy_production_nonnegative",
                     "support_rank_constant", "production_vs_finite_difference"]
    assert report["production_vs_finite_difference"].worst_value <= 1e-6


def test_stationary_run_passes():
    rho, _ = maxent_state(LADDER, ConstraintTarget(0.8))
    traj = evolve(rho, LADDER, opts=IntegratorOptions(t_end=10.0))
    report = check_invariants(traj, Tolerances(final_dissipator_norm=1e-9))
    assert report.passed
    assert "0 steps" in report["production_vs_finite_difference"].detail


def test_injected_trace_violation_is_located():
    traj = _relaxation()
    traj.records[3] = dataclasses.replace(traj.records[3], trace_error=1e-5)
    report = check_invariants(traj, finite_difference=False)
    assert not report.passed
    bad = report["conservation_trace"]
    assert not bad.passed and bad.step_index == 3 and bad.worst_value == 1e-5
    assert [c.check_name for c in report.failures()] == ["conservation_trace"]


def test_injected_entropy_drop_is_located():
    traj = _relaxation()
    traj.records[4] = dataclasses.replace(traj.records[4], entropy=traj.records[3].entropy - 1e-6)
    report = check_invariants(traj, finite_difference=False)
    assert report["entropy_monotonicity"].step_index == 4
    assert not report.passed


def test_report_json_entries():
    report = check_invariants(_relaxation(1.0))
    doc = json.loads(report.to_json())
    entries = doc["checks"]
    assert {"check_name", "pass", "worst_value", "tolerance", "step_index"} <= set(entries[0])
    assert doc["passed"] is True


def test_final_dissipator_norm_check():
    gens = GeneratorSet.from_arrays(np.diag([0.0, 1.0, 2.5]))
    traj = evolve(diag_state([0.5, 0.1, 0.4]), gens, opts=IntegratorOptions(t_end=40.0))
    assert check_invariants(traj, Tolerances(final_dissipator_norm=1e-6), False).passed
    short = evolve(diag_state([0.5, 0.1, 0.4]), gens, opts=IntegratorOptions(t_end=0.5))
    res = check_invariants(short, Tolerances(final_dissipator_norm=1e-6), False)
    assert not res["final_dissipator_norm"].passed


def test_backward_run_skips_monotonicity():
    traj = evolve(diag_state([0.5, 0.1, 0.4]), LADDER, opts=IntegratorOptions(t_end=-0.5))
    res = check_invariants(traj, finite_difference=False)
    assert res["entropy_monotonicity"].passed
    assert "backward" in res["entropy_monotonicity"].detail


def test_empty_trajectory_rejected():
    traj = _relaxation(1.0)
    traj.times, traj.states, traj.records = [], [], []
    with pytest.raises(ValueError):
        check_invariants(traj)


@settings(max_examples=10)
@given(seeds, st.sampled_from([2, 3, 4]))
def test_highprec_rate_matches_production(seed, d):
    rng = np.random.default_rng(seed)
    h = random_hamiltonian(d, rng)
    gens = GeneratorSet.from_arrays(h, [commuting_observable(h, rng)])
    rho = random_state(d, rng)
    fd, prod = highprec.single_rate(rho, gens.generators)
    assert prod == pytest.approx(fd, rel=1e-12, abs=1e-30)
    assert entropy_production(rho, gens) == pytest.approx(fd, rel=1e-7)


def test_highprec_classical_and_composite(rng):
    e = np.array([0.0, 1.0, 2.5])
    p = diag_state([0.5, 0.1, 0.4], CLASSICAL)
    fd, prod = highprec.single_rate(p, (e,))
    assert fd == pytest.approx(entropy_production(p, GeneratorSet.from_arrays(e)), rel=1e-8)
    sys = CompositeSystem.from_parts(random_hamiltonian(2, rng), random_hamiltonian(2, rng),
                                     0.3 * random_hamiltonian(4, rng))
    rho = random_state(4, rng)
    fd, prod = highprec.composite_rate(rho, sys.H, sys.dims)
    assert fd == pytest.approx(prod, rel=1e-10)
    assert fd == pytest.approx(composite_entropy_production(rho, sys), rel=1e-7)
    traj = evolve(random_state(3, rng), LADDER, opts=IntegratorOptions(t_end=0.1))
    assert entropy_rate_fd(traj, traj.final) == pytest.approx(traj.records[-1].entropy_production,
                                                              rel=1e-6)


def test_probe_rejects_bad_delta_and_nonequilibrium():
    rho = pure_state([0, 1, 0])
    for delta in (0.0, -1e-4, 0.02):
        with pytest.raises(ValueError, match="delta"):
            instability_probe(rho, LADDER, delta)
    with pytest.raises(ValueError, match="equilibrium"):
        instability_probe(diag_state([0.5, 0.1, 0.4]), LADDER, 1e-3)
    with pytest.raises(ValueError, match="mode"):
        instability_probe(rho, LADDER, 1e-3, mode="sideways")


def test_probe_infeasible_cases():
    # complement of the ground state cannot hold mean energy 0
    with pytest.raises(ProbeInfeasible):
        instability_probe(pure_state([1, 0, 0]), LADDER, 1e-3, mode="complement")
    # a full-rank state has no complement
    rho, _ = maxent_state(LADDER, ConstraintTarget(0.8))
    with pytest.raises(ProbeInfeasible):
        instability_probe(rho, LADDER, 1e-3, mode="complement")
    # delta larger than the smallest occupation (about 2.2e-3 here)
    cold, _ = maxent_state(LADDER, ConstraintTarget(0.05))
    with pytest.raises(ProbeInfeasible):
        instability_probe(cold, LADDER, 1e-2, mode="interior")


def test_probe_middle_eigenstate_departs_and_relaxes():
    rho = pure_state([0, 1, 0])
    res = instability_probe(rho, LADDER, 1e-3, opts=IntegratorOptions(t_end=50.0))
    assert res.mode == "complement" and res.classification == "partial_equilibrium"
    assert res.mean_shift <= 1e-12
    assert res.departure_ratio > 100
    assert res.final_distance_to_maxent <= 1e-6
    # the perturbed state's means match the eigenstate
    assert abs(np.trace(res.perturbed.entries @ LADDER.hamiltonian).real - 1.0) <= 1e-12
    doc = res.to_dict()
    assert doc["departure_ratio"] == res.departure_ratio


def test_probe_interior_returns(rng):
    rho, _ = maxent_state(LADDER, ConstraintTarget(0.8))
    res = instability_probe(rho, LADDER, 1e-3, seed=3)
    assert res.mode == "interior" and res.classification == "max_entropy_equilibrium"
    assert res.mean_shift <= 1e-12
    assert res.final_distance_to_equilibrium <= 1e-6
    assert res.max_distance <= 1e-3 * (1 + 1e-9)
    again = instability_probe(rho, LADDER, 1e-3, seed=3)
    assert np.array_equal(again.trajectory.final.entries, res.trajectory.final.entries)


def test_frobenius_distance():
    assert frobenius_distance(diag_state([1.0, 0.0]), diag_state([0.0, 1.0])) == pytest.approx(math.sqrt(2))
    assert entropy(diag_state([1.0, 0.0])) == 0.0
