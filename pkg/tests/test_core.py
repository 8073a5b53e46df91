from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pydantic
import pytest

from nbmf_annealing.core import (
    BinaryMatrix,
    BinaryVector,
    BoxVector,
    NonnegMatrix,
    RngSpec,
    column,
    format_matrix_csv,
    frobenius_error,
    read_matrix_csv,
    write_matrix_csv,
)
from nbmf_annealing.errors import ColumnIndexError, DimensionError, IngestionError


def naive_frobenius(V, W, H):
    total = 0.0
    for i in range(V.shape[0]):
        for j in range(V.shape[1]):
            product = sum(W[i, l] * H[l, j] for l in range(W.shape[1]))
            total += (V[i, j] - product) ** 2
    return total


def test_frobenius_error_is_zero_for_exact_factorization():
    W = np.array([[1.0, 2.0], [0.0, 1.0], [3.0, 0.5]])
    H = np.array([[1, 0, 1], [0, 1, 1]])
    assert frobenius_error(W @ H, W, H) == pytest.approx(0.0, abs=1e-20)


def test_frobenius_error_counts_unmatched_entry():
    V = NonnegMatrix(data=[[1, 0], [0, 1]])
    W = NonnegMatrix(data=[[1], [0]])
    H = BinaryMatrix(data=[[1, 0]])
    assert frobenius_error(V, W, H) == 1.0


def test_frobenius_error_matches_naive_loop_and_column_sum():
    generator = np.random.default_rng(7)
    for _ in range(10):
        V = generator.random((5, 4))
        W = generator.random((5, 2))
        H = generator.random((2, 4))
        value = frobenius_error(V, W, H)
        assert value == pytest.approx(naive_frobenius(V, W, H), rel=1e-12)
        by_column = sum(float(np.sum((V[:, j] - W @ H[:, j]) ** 2)) for j in range(4))
        assert value == pytest.approx(by_column, rel=1e-9)


def test_frobenius_error_names_offending_shapes():
    with pytest.raises(DimensionError) as O_o:
        frobenius_error(np.ones((3, 4)), np.ones((3, 2)), np.ones((3, 4)))
    assert '(3, 2)' in str(O_o.value)
    assert O_o.value.code == 'dimension-mismatch'


def test_column_returns_copy():
    identity = NonnegMatrix(data=np.eye(3))
    assert column(identity, 1).tolist() == [0.0, 1.0, 0.0]
    assert column(np.array([[1, 2], [3, 4]]), 0).tolist() == [1, 3]

    copied = column(identity, 0)
    copied[0] = 5.0
    assert identity.data[0, 0] == 1.0


def test_column_out_of_range():
    with pytest.raises(ColumnIndexError):
        column(np.eye(3), 3)
    with pytest.raises(IndexError):
        column(np.eye(3), -1)


def test_matrix_models_enforce_invariants():
    with pytest.raises(pydantic.ValidationError):
        NonnegMatrix(data=[[1.0, -0.5]])
    with pytest.raises(pydantic.ValidationError):
        NonnegMatrix(data=[[1.0, np.nan]])
    with pytest.raises(pydantic.ValidationError):
        BinaryMatrix(data=[[0, 2]])
    with pytest.raises(pydantic.ValidationError):
        BinaryVector(data=[[0, 1]])


def test_models_are_read_only():
    matrix = NonnegMatrix(data=[[1.0, 2.0]])
    with pytest.raises(ValueError):
        matrix.data[0, 0] = 3.0
    with pytest.raises(pydantic.ValidationError):
        matrix.data = np.zeros((1, 2))


def test_binary_vector_bits():
    vector = BinaryVector(data=[1, 0, 1])
    assert vector.len == 3
    assert vector.bits() == '101'
    assert BinaryMatrix.from_columns([vector, BinaryVector(data=[0, 0, 1])]).shape == (3, 2)


def test_box_vector_requires_point_in_box():
    box = BoxVector(data=[0.5, 2.0], lower=[0.0, 0.0], upper=[1.0, np.inf])
    assert box.len == 2
    with pytest.raises(pydantic.ValidationError):
        BoxVector(data=[1.5], lower=[0.0], upper=[1.0])
    with pytest.raises(pydantic.ValidationError):
        BoxVector(data=[0.5], lower=[1.0], upper=[0.0])
    with pytest.raises(pydantic.ValidationError):
        BoxVector(data=[0.5, 0.5], lower=[0.0], upper=[1.0])


def test_rng_streams_are_reproducible():
    spec = RngSpec(master_seed=42, stream_id=3)
    first = spec.generator().random(1000)
    second = spec.generator().random(1000)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, spec.stream(4).generator().random(1000))
    assert not np.array_equal(first, spec.at_epoch(1).generator().random(1000))
    assert not np.array_equal(first, spec.at_phase(1).generator().random(1000))


def test_rng_streams_do_not_depend_on_threads():
    base = RngSpec(master_seed=9)
    expected = [base.stream(j).generator().random(100) for j in range(16)]
    with ThreadPoolExecutor(max_workers=4) as executor:
        drawn = list(executor.map(lambda j: base.stream(j).generator().random(100), reversed(range(16))))
    for j, values in enumerate(reversed(drawn)):
        assert np.array_equal(values, expected[j])


def test_rng_seed_range():
    RngSpec(master_seed=2**64 - 1)
    with pytest.raises(pydantic.ValidationError):
        RngSpec(master_seed=-1)
    with pytest.raises(pydantic.ValidationError):
        RngSpec(master_seed=2**64)


def test_matrix_csv_round_trip(tmp_path):
    matrix = np.array([[0.1, 2.0, 3.5], [1e-17, 0.0, 7.25]])
    path = tmp_path / 'matrix.csv'
    write_matrix_csv(path, matrix)
    assert np.array_equal(read_matrix_csv(path), matrix)
    assert path.read_bytes().count(b'\n') == 2
    assert format_matrix_csv(matrix).startswith('0.10000000000000001,2,3.5\n')


@pytest.mark.parametrize(
    ('content', 'message'),
    [
        ('1,2\n3\n', 'expected 2 values'),
        ('1,nan\n', 'NaN or Inf'),
        ('1,-2\n', 'negative'),
        ('', 'no data'),
        ('1,a\n', ':1:'),
    ],
)
def test_matrix_csv_rejects_bad_input(tmp_path, content, message):
    path = tmp_path / 'bad.csv'
    path.write_text(content, encoding='utf-8')
    with pytest.raises(IngestionError) as O_o:
        read_matrix_csv(path)
    assert message in str(O_o.value)


def test_matrix_csv_missing_file(tmp_path):
    with pytest.raises(IngestionError):
        read_matrix_csv(tmp_path / 'missing.csv')
    with pytest.raises(OSError):
        read_matrix_csv(tmp_path / 'missing.csv')
