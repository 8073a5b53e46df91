import itertools

import numpy as np
import pydantic
import pytest

from nbmf_annealing.core import BinaryVector
from nbmf_annealing.errors import DimensionError, IngestionError, QuboFormatError
from nbmf_annealing.qubo import (
    IsingInstance,
    QuboInstance,
    build_qubo,
    energies,
    energy,
    format_qubo,
    ising_energy,
    ising_to_qubo,
    objective,
    parse_qubo,
    qubo_to_ising,
    read_qubo,
    write_qubo,
)


def all_states(size: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=size)), dtype=np.float64)


def random_instance(generator: np.random.Generator, m: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    return generator.random((m, k)), generator.random(m) * k


def test_identity_example():
    q = build_qubo(np.eye(2), np.array([1.0, 0.0]))
    assert q.q.tolist() == [[-1.0, 0.0], [0.0, 1.0]]
    assert q.offset == 1.0
    assert energy(q, BinaryVector(data=[1, 0])) == -1.0
    assert objective(q, np.array([1, 0])) == 0.0


def test_zero_target():
    W = np.array([[1.0, 2.0], [0.5, 0.0]])
    q = build_qubo(W, np.zeros(2))
    assert np.allclose(q.q, W.T @ W)
    assert q.offset == 0.0
    assert energy(q, np.zeros(2)) == 0.0
    assert energies(q, all_states(2)).min() == 0.0


def test_objective_identity_holds_for_every_assignment():
    generator = np.random.default_rng(0)
    for _ in range(1000):
        k = int(generator.integers(1, 7))
        W, v = random_instance(generator, int(generator.integers(1, 6)), k)
        q = build_qubo(W, v)
        states = all_states(k)
        residuals = v[None, :] - states @ W.T
        direct = np.einsum('ri,ri->r', residuals, residuals)
        assert np.allclose(energies(q, states) + q.offset, direct, rtol=1e-9, atol=1e-9)


def test_objective_identity_for_larger_instances():
    generator = np.random.default_rng(1)
    for k in (10, 12):
        W, v = random_instance(generator, 15, k)
        q = build_qubo(W, v)
        states = all_states(k)
        residuals = v[None, :] - states @ W.T
        direct = np.einsum('ri,ri->r', residuals, residuals)
        assert np.allclose(energies(q, states) + q.offset, direct, rtol=1e-9, atol=1e-9)


def test_qubo_is_symmetric_with_nonnegative_offset():
    generator = np.random.default_rng(2)
    q = build_qubo(*random_instance(generator, 6, 5))
    assert np.array_equal(q.q, q.q.T)
    assert q.offset >= 0
    assert q.size == 5


def test_build_qubo_rejects_mismatched_shapes():
    with pytest.raises(DimensionError):
        build_qubo(np.ones((3, 2)), np.ones(4))


def test_energy_matches_double_loop():
    generator = np.random.default_rng(3)
    q = build_qubo(*random_instance(generator, 5, 4))
    h = np.array([1, 0, 1, 1])
    expected = sum(q.q[i, j] * h[i] * h[j] for i in range(4) for j in range(4))
    assert energy(q, h) == pytest.approx(expected, rel=1e-12)


def test_energy_rejects_wrong_length():
    q = build_qubo(np.eye(2), np.ones(2))
    with pytest.raises(DimensionError):
        energy(q, np.ones(3))


def test_instances_validate_their_matrices():
    with pytest.raises(pydantic.ValidationError):
        QuboInstance(q=[[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(pydantic.ValidationError):
        QuboInstance(q=[[np.inf]])
    with pytest.raises(pydantic.ValidationError):
        IsingInstance(couplings=[[1.0]], biases=[0.0])
    with pytest.raises(pydantic.ValidationError):
        IsingInstance(couplings=[[0.0, 1.0], [1.0, 0.0]], biases=[0.0])


def test_single_variable_ising():
    ising = qubo_to_ising(QuboInstance(q=[[3.0]]))
    assert ising.biases.tolist() == [-1.5]
    assert ising.constant == 1.5
    assert ising.couplings.tolist() == [[0.0]]


def test_zero_qubo_maps_to_zero_ising():
    ising = qubo_to_ising(QuboInstance(q=np.zeros((3, 3))))
    assert not ising.couplings.any()
    assert not ising.biases.any()
    assert ising.constant == 0.0


def test_ising_energies_agree_over_all_assignments():
    generator = np.random.default_rng(4)
    q = build_qubo(*random_instance(generator, 4, 3))
    ising = qubo_to_ising(q)
    for x in all_states(3):
        assert ising_energy(ising, 2 * x - 1) == pytest.approx(energy(q, x), abs=1e-12)


def test_argmin_is_preserved_in_both_directions():
    generator = np.random.default_rng(5)
    for _ in range(20):
        k = int(generator.integers(2, 11))
        q = build_qubo(*random_instance(generator, 8, k))
        ising = qubo_to_ising(q)
        states = all_states(k)
        qubo_values = energies(q, states)
        ising_values = np.array([ising_energy(ising, 2 * x - 1) for x in states])
        assert np.allclose(qubo_values, ising_values, atol=1e-9)
        assert int(np.argmin(qubo_values)) == int(np.argmin(ising_values))

        back = ising_to_qubo(ising)
        assert np.allclose(back.q, q.q, atol=1e-12)
        assert np.allclose(energies(back, states) + back.offset, qubo_values, atol=1e-9)


def test_text_format_round_trip(tmp_path):
    generator = np.random.default_rng(6)
    q = build_qubo(*random_instance(generator, 5, 4))
    path = tmp_path / 'column.qubo'
    write_qubo(path, q)
    loaded = read_qubo(path)
    assert np.allclose(loaded.q, q.q, rtol=1e-15, atol=0)
    assert loaded.offset == q.offset
    assert format_qubo(loaded).splitlines()[0] == f'4 {format(q.offset, ".17g")}'


def test_text_format_skips_zero_coefficients():
    text = format_qubo(QuboInstance(q=[[-1.0, 0.0], [0.0, 1.0]], offset=1.0))
    assert text == '2 1\n0 0 -1\n1 1 1\n'
    parsed = parse_qubo(text)
    assert parsed.q.tolist() == [[-1.0, 0.0], [0.0, 1.0]]


def test_off_diagonal_coefficient_is_split_symmetrically():
    parsed = parse_qubo('2 0\n0 1 3\n')
    assert parsed.q.tolist() == [[0.0, 1.5], [1.5, 0.0]]


@pytest.mark.parametrize(
    ('text', 'line'),
    [
        ('2\n', 1),
        ('two 0\n', 1),
        ('0 0\n', 1),
        ('2 0\n0 0 1\n1 0 2\n', 3),
        ('2 0\n0 1\n', 2),
        ('2 0\n0 0 x\n', 2),
        ('2 0\n0 5 1\n', 2),
    ],
)
def test_parse_errors_cite_the_line(text, line):
    with pytest.raises(QuboFormatError) as O_o:
        parse_qubo(text)
    assert O_o.value.line == line
    assert str(O_o.value).startswith(f'line {line}:')


def test_parse_ignores_comments_and_blank_lines():
    parsed = parse_qubo('1 0.5\n\n# comment\n0 0 2\n')
    assert parsed.q.tolist() == [[2.0]]
    assert parsed.offset == 0.5


def test_read_missing_file(tmp_path):
    with pytest.raises(IngestionError):
        read_qubo(tmp_path / 'missing.qubo')
