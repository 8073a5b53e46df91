import logging
from pathlib import Path
from typing import Any, Union

import numpy as np
import pydantic

from nbmf_annealing.constants import INIT_EPOCH
from nbmf_annealing.errors import ColumnIndexError, IngestionError, shape_mismatch

logger = logging.getLogger(__name__)

MAX_SEED = 2**64 - 1


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def _coerce(value: Any, *, ndim: int, dtype: type) -> np.ndarray:
    if isinstance(value, (NonnegMatrix, BinaryMatrix, BinaryVector)):
        value = value.data
    array = np.array(value, dtype=np.float64)
    if array.ndim != ndim:
        raise ValueError(f'expected {ndim}-dimensional data, got shape {array.shape}')
    if array.size == 0:
        raise ValueError('dimensions must be positive')
    if not np.isfinite(array).all():
        raise ValueError('data must be finite')
    if dtype is np.int8:
        if not np.isin(array, (0.0, 1.0)).all():
            raise ValueError('every element must be 0 or 1')
        return array.astype(np.int8)
    return array


class FrozenArrayModel(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)


class NonnegMatrix(FrozenArrayModel):
    """Dense row-major float64 matrix with nonnegative entries (V and W)."""

    data: np.ndarray

    @pydantic.field_validator('data', mode='before')
    @classmethod
    def _validate_data(cls, value: Any) -> np.ndarray:
        array = _coerce(value, ndim=2, dtype=np.float64)
        if (array < 0).any():
            raise ValueError('every element must be >= 0')
        return _frozen(array)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


class BinaryMatrix(FrozenArrayModel):
    """Dense {0,1} coefficient matrix H (k rows, n columns)."""

    data: np.ndarray

    @pydantic.field_validator('data', mode='before')
    @classmethod
    def _validate_data(cls, value: Any) -> np.ndarray:
        return _frozen(_coerce(value, ndim=2, dtype=np.int8))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @classmethod
    def from_columns(cls, columns: list['BinaryVector']) -> 'BinaryMatrix':
        return cls(data=np.stack([c.data for c in columns], axis=1))


class BinaryVector(FrozenArrayModel):
    data: np.ndarray

    @pydantic.field_validator('data', mode='before')
    @classmethod
    def _validate_data(cls, value: Any) -> np.ndarray:
        return _frozen(_coerce(value, ndim=1, dtype=np.int8))

    @property
    def len(self) -> int:
        return self.data.shape[0]

    def bits(self) -> str:
        return ''.join(str(int(b)) for b in self.data)


class BoxVector(FrozenArrayModel):
    """A point together with the box `lower <= data <= upper` it lives in."""

    data: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @pydantic.field_validator('data', 'lower', 'upper', mode='before')
    @classmethod
    def _validate_arrays(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim != 1 or array.size == 0:
            raise ValueError(f'expected a non-empty vector, got shape {array.shape}')
        if np.isnan(array).any():
            raise ValueError('values must not be NaN')
        return _frozen(array)

    @pydantic.model_validator(mode='after')
    def _validate_box(self) -> 'BoxVector':
        if not (self.data.shape == self.lower.shape == self.upper.shape):
            raise ValueError(
                f'data, lower and upper must have equal length '
                f'({self.data.shape}, {self.lower.shape}, {self.upper.shape})',
            )
        if (self.lower > self.upper).any():
            raise ValueError('lower must not exceed upper')
        if ((self.data < self.lower) | (self.data > self.upper)).any():
            raise ValueError('data must lie within [lower, upper]')
        return self

    @property
    def len(self) -> int:
        return self.data.shape[0]


class RngSpec(pydantic.BaseModel):
    """
    Address of one reproducible random stream.

    Streams are keyed by `(master_seed, epoch, stream_id, phase)` through a
    `SeedSequence` feeding a counter-based Philox generator, so the sequence
    drawn from a spec never depends on which worker or thread consumes it.
    `phase` separates the stages of a multi-stage solver on one column.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    master_seed: int = pydantic.Field(default=0, ge=0, le=MAX_SEED)
    stream_id: int = pydantic.Field(default=0, ge=0)
    epoch: int = pydantic.Field(default=INIT_EPOCH, ge=0)
    phase: int = pydantic.Field(default=0, ge=0)

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.master_seed, spawn_key=(self.epoch, self.stream_id, self.phase))
        return np.random.Generator(np.random.Philox(sequence))

    def stream(self, stream_id: int) -> 'RngSpec':
        return self.model_copy(update={'stream_id': stream_id})

    def at_epoch(self, epoch: int) -> 'RngSpec':
        return self.model_copy(update={'epoch': epoch})

    def at_phase(self, phase: int) -> 'RngSpec':
        return self.model_copy(update={'phase': phase})


MatrixLike = Union[NonnegMatrix, BinaryMatrix, np.ndarray]


def as_array(matrix: Union[MatrixLike, BinaryVector]) -> np.ndarray:
    """Return the float64 array view of a matrix or vector model (no copy for float data)."""

    if isinstance(matrix, (NonnegMatrix, BinaryMatrix, BinaryVector)):
        matrix = matrix.data
    return np.asarray(matrix, dtype=np.float64)


def frobenius_error(V: MatrixLike, W: MatrixLike, H: MatrixLike) -> float:
    """Squared Frobenius norm ||V - WH||_F^2."""

    v, w, h = as_array(V), as_array(W), as_array(H)
    conforms = v.ndim == w.ndim == h.ndim == 2 and w.shape[1] == h.shape[0] and v.shape == (w.shape[0], h.shape[1])
    if not conforms:
        raise shape_mismatch('frobenius_error', V=v.shape, W=w.shape, H=h.shape)
    residual = v - w @ h
    return float(np.sum(residual * residual))


def column(matrix: MatrixLike, j: int) -> np.ndarray:
    """Copy of column `j`, keeping the dtype of the source."""

    data = matrix.data if isinstance(matrix, (NonnegMatrix, BinaryMatrix)) else np.asarray(matrix)
    if not 0 <= j < data.shape[1]:
        raise ColumnIndexError(f'column index {j} out of range for {data.shape[1]} columns')
    return data[:, j].copy()


def read_matrix_csv(path: Union[str, Path], *, nonnegative: bool = True) -> np.ndarray:
    """
    Read a headerless CSV matrix.

    Rejects ragged rows, empty files, non-finite values and (by default)
    negative values.
    """

    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except (OSError, UnicodeDecodeError) as O_o:
        raise IngestionError(f'cannot read {path}: {O_o}') from O_o

    rows: list[list[float]] = []
    for line_number, line in enumerate(text.split('\n'), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(cell) for cell in line.split(',')])
        except ValueError as O_o:
            raise IngestionError(f'{path}:{line_number}: {O_o}') from O_o
        if len(rows[-1]) != len(rows[0]):
            raise IngestionError(f'{path}:{line_number}: expected {len(rows[0])} values, got {len(rows[-1])}')
    if not rows:
        raise IngestionError(f'{path}: no data')

    array = np.array(rows, dtype=np.float64)
    if not np.isfinite(array).all():
        raise IngestionError(f'{path}: NaN or Inf values are not accepted')
    if nonnegative and (array < 0).any():
        raise IngestionError(f'{path}: negative values are not accepted')
    logger.debug('read %s matrix from %s', array.shape, path)
    return array


def format_matrix_csv(matrix: Union[MatrixLike, BinaryVector]) -> str:
    array = np.atleast_2d(as_array(matrix))
    return ''.join(','.join(format(float(x), '.17g') for x in row) + '\n' for row in array)


def write_matrix_csv(path: Union[str, Path], matrix: MatrixLike) -> None:
    with Path(path).open('w', encoding='utf-8', newline='\n') as stream:
        stream.write(format_matrix_csv(matrix))
