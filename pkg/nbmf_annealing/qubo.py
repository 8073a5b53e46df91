"""
QUBO encoding of the binary column subproblem `min_h ||v - Wh||^2`.

With `Q = W^T W - 2 diag(W^T v)` and `offset = v^T v` every binary `h`
satisfies `h^T Q h + offset = ||v - Wh||^2`; the linear terms sit on the
diagonal because `h_i^2 = h_i`.
"""
import logging
from pathlib import Path
from typing import Any, Union

import numpy as np
import pydantic

from nbmf_annealing.core import BinaryVector, FrozenArrayModel, MatrixLike, as_array
from nbmf_annealing.errors import DimensionError, IngestionError, QuboFormatError, shape_mismatch

logger = logging.getLogger(__name__)


def _square(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] == 0:
        raise ValueError(f'expected a non-empty square matrix, got shape {array.shape}')
    if not np.isfinite(array).all():
        raise ValueError('coefficients must be finite')
    return array


class QuboInstance(FrozenArrayModel):
    """Symmetric coefficient matrix plus the constant restoring the least-squares objective."""

    q: np.ndarray
    offset: float = 0.0

    @pydantic.field_validator('q', mode='before')
    @classmethod
    def _validate_q(cls, value: Any) -> np.ndarray:
        array = _square(value)
        if not np.array_equal(array, array.T):
            raise ValueError('q must be symmetric')
        array.flags.writeable = False
        return array

    @property
    def size(self) -> int:
        return self.q.shape[0]


class IsingInstance(FrozenArrayModel):
    """
    Spin model with energy `-sum_ij J_ij s_i s_j - sum_i b_i s_i + constant`.

    The sum runs over ordered pairs; `couplings` is symmetric with a zero
    diagonal. `biases` are called ising biases to keep them apart from the
    coefficient column h.
    """

    couplings: np.ndarray
    biases: np.ndarray
    constant: float = 0.0

    @pydantic.field_validator('couplings', mode='before')
    @classmethod
    def _validate_couplings(cls, value: Any) -> np.ndarray:
        array = _square(value)
        if not np.array_equal(array, array.T):
            raise ValueError('couplings must be symmetric')
        if np.any(np.diag(array) != 0):
            raise ValueError('couplings must have a zero diagonal')
        array.flags.writeable = False
        return array

    @pydantic.field_validator('biases', mode='before')
    @classmethod
    def _validate_biases(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim != 1 or not np.isfinite(array).all():
            raise ValueError('biases must be a finite vector')
        array.flags.writeable = False
        return array

    @pydantic.model_validator(mode='after')
    def _validate_sizes(self) -> 'IsingInstance':
        if self.biases.shape[0] != self.couplings.shape[0]:
            raise ValueError('biases and couplings sizes differ')
        return self

    @property
    def size(self) -> int:
        return self.biases.shape[0]


def build_qubo(W: MatrixLike, v: Union[np.ndarray, list[float]]) -> QuboInstance:
    w = as_array(W)
    target = np.asarray(v, dtype=np.float64).reshape(-1)
    if w.ndim != 2 or w.shape[0] != target.shape[0]:
        raise shape_mismatch('build_qubo', W=w.shape, v=target.shape)
    if not (np.isfinite(w).all() and np.isfinite(target).all()):
        raise ValueError('W and v must be finite')

    q = w.T @ w
    # Exact symmetry regardless of BLAS summation order
    q = 0.5 * (q + q.T)
    q[np.diag_indices_from(q)] -= 2.0 * (w.T @ target)
    return QuboInstance(q=q, offset=float(target @ target))


def _state(q: QuboInstance, h: Union[BinaryVector, np.ndarray]) -> np.ndarray:
    x = as_array(h)
    if x.shape != (q.size,):
        raise DimensionError(f'state has shape {x.shape}, instance has {q.size} variables')
    return x


def energy(q: QuboInstance, h: Union[BinaryVector, np.ndarray]) -> float:
    """`h^T Q h` without the offset."""

    x = _state(q, h)
    return float(x @ q.q @ x)


def objective(q: QuboInstance, h: Union[BinaryVector, np.ndarray]) -> float:
    """`energy + offset`, the squared residual for instances built by `build_qubo`."""

    return energy(q, h) + q.offset


def energies(q: QuboInstance, states: np.ndarray) -> np.ndarray:
    """Energies of a stack of states, one per row."""

    states = np.asarray(states, dtype=np.float64)
    return np.einsum('ri,ij,rj->r', states, q.q, states)


def qubo_to_ising(q: QuboInstance) -> IsingInstance:
    """
    Substitute `x = (1 + s) / 2`.

    Off-diagonal `Q_ij` become couplings `-Q_ij / 4`, the biases are
    `-(1/2) sum_j Q_ij` and the constant collects `(sum_ij Q_ij + trace Q) / 4`.
    """

    matrix = q.q
    couplings = -0.25 * matrix
    np.fill_diagonal(couplings, 0.0)
    biases = -0.5 * matrix.sum(axis=1)
    constant = 0.25 * (float(matrix.sum()) + float(np.trace(matrix)))
    return IsingInstance(couplings=couplings, biases=biases, constant=constant)


def ising_to_qubo(ising: IsingInstance) -> QuboInstance:
    """Inverse of `qubo_to_ising` (substitute `s = 2x - 1`); the leftover constant becomes the offset."""

    J, b = ising.couplings, ising.biases
    q = -4.0 * J
    row_sums = J.sum(axis=1)
    q[np.diag_indices_from(q)] = 4.0 * row_sums - 2.0 * b
    offset = -float(J.sum()) + float(b.sum()) + ising.constant
    return QuboInstance(q=q, offset=offset)


def ising_energy(ising: IsingInstance, spins: np.ndarray) -> float:
    s = np.asarray(spins, dtype=np.float64)
    if s.shape != (ising.size,):
        raise DimensionError(f'spins have shape {s.shape}, instance has {ising.size} spins')
    return float(-(s @ ising.couplings @ s) - ising.biases @ s + ising.constant)


def format_qubo(q: QuboInstance) -> str:
    """
    Plain-text export: header `N offset`, then `i j value` per nonzero upper-triangular coefficient.

    Off-diagonal coefficients are written as `Q_ij + Q_ji` so the text form is
    the polynomial an external sampler expects.
    """

    lines = [f'{q.size} {format(q.offset, ".17g")}']
    for i in range(q.size):
        for j in range(i, q.size):
            value = q.q[i, i] if i == j else q.q[i, j] + q.q[j, i]
            if value != 0.0:
                lines.append(f'{i} {j} {format(float(value), ".17g")}')
    return '\n'.join(lines) + '\n'


def parse_qubo(text: str) -> QuboInstance:
    lines = text.split('\n')
    header = lines[0].split() if lines else []
    if len(header) != 2:
        raise QuboFormatError('header must be "N offset"', line=1)
    try:
        size, offset = int(header[0]), float(header[1])
    except ValueError as O_o:
        raise QuboFormatError(f'invalid header: {O_o}', line=1) from O_o
    if size <= 0:
        raise QuboFormatError('N must be positive', line=1)

    q = np.zeros((size, size))
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.lstrip().startswith('#'):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise QuboFormatError('expected "i j value"', line=line_number)
        try:
            i, j, value = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as O_o:
            raise QuboFormatError(str(O_o), line=line_number) from O_o
        if not (0 <= i <= j < size) or not np.isfinite(value):
            raise QuboFormatError(
                f'entry ({i}, {j}, {value}) outside the upper triangle of size {size}',
                line=line_number,
            )
        if i == j:
            q[i, i] += value
        else:
            q[i, j] += 0.5 * value
            q[j, i] += 0.5 * value
    return QuboInstance(q=q, offset=offset)


def write_qubo(path: Union[str, Path], q: QuboInstance) -> None:
    with Path(path).open('w', encoding='utf-8', newline='\n') as stream:
        stream.write(format_qubo(q))
    logger.debug('wrote %d-variable QUBO to %s', q.size, path)


def read_qubo(path: Union[str, Path]) -> QuboInstance:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except (OSError, UnicodeDecodeError) as O_o:
        raise IngestionError(f'cannot read {path}: {O_o}') from O_o
    return parse_qubo(text)
