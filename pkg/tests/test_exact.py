import itertools

import numpy as np
import pytest

from nbmf_annealing.errors import CapacityError
from nbmf_annealing.exact import ExactMethod, solve_exact
from nbmf_annealing.qubo import QuboInstance, build_qubo, energies
from nbmf_annealing.results import SolverKind


def enumerate_minimum(q: QuboInstance) -> float:
    states = np.array(list(itertools.product((0, 1), repeat=q.size)), dtype=np.float64)
    return float(energies(q, states).min())


def random_qubo(generator: np.random.Generator, k: int, m: int = 20) -> QuboInstance:
    return build_qubo(generator.random((m, k)), generator.random(m) * k / 2)


def test_identity_example():
    report = solve_exact(build_qubo(np.eye(2), np.array([1.0, 0.0])))
    assert report.best_state.bits() == '10'
    assert report.best_objective == 0.0
    assert report.optimal is True
    assert report.degenerate is False
    assert report.solver is SolverKind.EXACT


def test_zero_instance_breaks_ties_towards_zeros():
    report = solve_exact(QuboInstance(q=np.zeros((4, 4))))
    assert report.best_state.bits() == '0000'
    assert report.best_energy == 0.0
    assert report.degenerate is True

    report = solve_exact(QuboInstance(q=np.zeros((4, 4))), method=ExactMethod.BRANCH_AND_BOUND)
    assert report.best_state.bits() == '0000'


def test_enumeration_matches_exhaustive_minimum():
    generator = np.random.default_rng(0)
    for _ in range(100):
        q = random_qubo(generator, 12)
        report = solve_exact(q)
        assert report.best_energy == enumerate_minimum(q)
        assert report.samples_evaluated == 2**12
        assert report.optimal is True


def test_branch_and_bound_agrees_with_enumeration():
    generator = np.random.default_rng(1)
    for k in (1, 3, 8, 12):
        for _ in range(10):
            q = random_qubo(generator, k)
            enumerated = solve_exact(q, method=ExactMethod.ENUMERATE)
            searched = solve_exact(q, method=ExactMethod.BRANCH_AND_BOUND)
            assert searched.best_energy == pytest.approx(enumerated.best_energy, abs=1e-9)
            assert searched.best_state.bits() == enumerated.best_state.bits()
            assert searched.optimal is True
            assert searched.degenerate is None



def test_branch_and_bound_matches_enumeration_on_twelve_variables():
    generator = np.random.default_rng(2)
    for _ in range(100):
        q = random_qubo(generator, 12)
        searched = solve_exact(q, method=ExactMethod.BRANCH_AND_BOUND)
        assert searched.best_energy == pytest.approx(enumerate_minimum(q), abs=1e-9)


def test_auto_switches_to_branch_and_bound_above_threshold():
    generator = np.random.default_rng(2)
    q = random_qubo(generator, 6)
    report = solve_exact(q, exhaustive_max=4)
    assert report.degenerate is None
    assert report.best_energy == pytest.approx(enumerate_minimum(q), abs=1e-9)


def test_capacity_limits():
    with pytest.raises(CapacityError) as O_o:
        solve_exact(QuboInstance(q=np.zeros((41, 41))))
    assert O_o.value.code == 'capacity'
    with pytest.raises(CapacityError):
        solve_exact(QuboInstance(q=np.zeros((31, 31))), method=ExactMethod.ENUMERATE)
    with pytest.raises(CapacityError):
        solve_exact(QuboInstance(q=np.zeros((6, 6))), hard_cap=5)


def test_time_limit_returns_incumbent():
    generator = np.random.default_rng(3)
    q = random_qubo(generator, 36, m=40)
    report = solve_exact(q, time_limit=1e-9)
    assert report.optimal is False
    assert report.best_state.len == 36
    assert report.best_objective == pytest.approx(report.best_energy + q.offset)

    report = solve_exact(random_qubo(generator, 20), time_limit=1e-9, method=ExactMethod.ENUMERATE)
    assert report.optimal is False
    assert report.samples_evaluated < 2**20
