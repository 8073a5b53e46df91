"""
Synthetic datasets and real-data ingestion.

Synthetic coefficients are built from gamma samples `A` normalised by their
maximum: the first half of `A` is mirrored to `1 - A` (values near 1), the
second half is kept (values near 0) and the combined pool is shuffled into H.
Small gamma shapes make H close to binary, large shapes spread it around the
middle of [0,1].
"""
import json
import logging
from pathlib import Path
from typing import NamedTuple, Optional, Union

import numpy as np
import pydantic

from nbmf_annealing.constants import MANIFEST_NAME
from nbmf_annealing.core import NonnegMatrix, RngSpec, write_matrix_csv
from nbmf_annealing.errors import IngestionError, NumericError, ParameterError, SizingError
from nbmf_annealing.reporting import package_version, write_atomic

logger = logging.getLogger(__name__)

PGM_SUFFIXES = ('.pgm', '.pnm')
DATASET_FILES = {'V': 'V.csv', 'W_true': 'W_true.csv', 'H_true': 'H_true.csv'}

# Streams drawn from SyntheticSpec.seed
H_STREAM = 0
W_STREAM = 1


def derived_rows(n: int, k: int) -> int:
    """
    Number of rows `m = round(2nk / (n - 2k))`.

    Keeps the ratio of unknowns to observations fixed across (n, k); the
    result always satisfies `k(n + m) < nm`.
    """

    if n <= 2 * k:
        raise SizingError(f'n must exceed 2k (n={n}, k={k})')
    m = int(round(2 * n * k / (n - 2 * k)))
    if k * (n + m) >= n * m:
        raise SizingError(f'k(n+m) < nm does not hold for n={n}, k={k}, m={m}')
    return m


class SyntheticSpec(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    n: int = pydantic.Field(gt=0)
    k: int = pydantic.Field(gt=0)
    rho: float = pydantic.Field(gt=0, allow_inf_nan=False)
    theta: float = pydantic.Field(default=1.0, gt=0, allow_inf_nan=False)
    seed: RngSpec = RngSpec()

    @pydantic.model_validator(mode='after')
    def _validate_sizing(self) -> 'SyntheticSpec':
        try:
            derived_rows(self.n, self.k)
        except SizingError as O_o:
            raise ValueError(O_o.message) from O_o
        return self

    @pydantic.computed_field  # type: ignore[misc]
    @property
    def m(self) -> int:
        return derived_rows(self.n, self.k)


class SyntheticDataset(NamedTuple):
    V: NonnegMatrix
    W_true: NonnegMatrix
    H_true: NonnegMatrix


def _gamma(
    generator: np.random.Generator,
    rho: float,
    theta: float,
    size: Union[int, tuple[int, ...]],
) -> np.ndarray:
    if not (rho > 0 and theta > 0 and np.isfinite(rho) and np.isfinite(theta)):
        raise ParameterError(f'gamma shape and scale must be positive and finite (rho={rho}, theta={theta})')
    return generator.gamma(rho, theta, size)


def sample_gamma(rho: float, theta: float, count: int, rng: RngSpec) -> np.ndarray:
    """I.i.d. gamma(shape `rho`, scale `theta`) samples from the stream `rng`."""

    if count < 0:
        raise ParameterError(f'count must be >= 0, got {count}')
    return _gamma(rng.generator(), rho, theta, count)


def _pools(generator: np.random.Generator, spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    size = spec.n * spec.k
    samples = _gamma(generator, spec.rho, spec.theta, size)
    peak = samples.max()
    if not peak > 0:
        raise NumericError('all gamma samples underflowed to zero')
    samples = samples / peak
    half = size // 2
    return 1.0 - samples[:half], samples[half:]


def gamma_pools(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """The near-1 pool B (first `floor(nk/2)` values mirrored) and the near-0 pool C that make up H."""

    return _pools(spec.seed.stream(H_STREAM).generator(), spec)


def generate_h(spec: SyntheticSpec) -> NonnegMatrix:
    generator = spec.seed.stream(H_STREAM).generator()
    near_one, near_zero = _pools(generator, spec)
    pool = np.concatenate([near_one, near_zero])
    return NonnegMatrix(data=pool[generator.permutation(pool.shape[0])].reshape(spec.k, spec.n))


def generate_dataset(spec: SyntheticSpec) -> SyntheticDataset:
    """`V = W_true H_true` with `W_true ~ gamma(1, 1)` of shape m x k."""

    m = derived_rows(spec.n, spec.k)
    H = generate_h(spec)
    W = _gamma(spec.seed.stream(W_STREAM).generator(), 1.0, 1.0, (m, spec.k))
    logger.debug('generated synthetic dataset m=%d n=%d k=%d rho=%g', m, spec.n, spec.k, spec.rho)
    return SyntheticDataset(V=NonnegMatrix(data=W @ H.data), W_true=NonnegMatrix(data=W), H_true=H)


def export_dataset(dataset: SyntheticDataset, spec: SyntheticSpec, directory: Union[str, Path]) -> Path:
    """Write V, W_true and H_true as CSV plus a manifest from which they can be regenerated."""

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, filename in DATASET_FILES.items():
        write_matrix_csv(directory / filename, getattr(dataset, name))
    manifest = {
        'spec': spec.model_dump(mode='json'),
        'files': DATASET_FILES,
        'version': package_version(),
    }
    return write_atomic(directory / MANIFEST_NAME, json.dumps(manifest, indent=2, sort_keys=True) + '\n')


def load_manifest(path: Union[str, Path]) -> SyntheticSpec:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        payload = json.loads(path.read_text(encoding='utf-8'))
    except (OSError, ValueError) as O_o:
        raise IngestionError(f'cannot read manifest {path}: {O_o}') from O_o
    spec = dict(payload.get('spec', {}))
    spec.pop('m', None)
    return SyntheticSpec.model_validate(spec)


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First `count` whitespace separated header tokens, skipping comments, and the offset after them."""

    tokens: list[bytes] = []
    position = 0
    while len(tokens) < count:
        while position < len(data) and data[position:position + 1].isspace():
            position += 1
        if position >= len(data):
            raise ValueError('truncated header')
        if data[position:position + 1] == b'#':
            while position < len(data) and data[position:position + 1] not in (b'\n', b'\r'):
                position += 1
            continue
        start = position
        while position < len(data) and not data[position:position + 1].isspace():
            position += 1
        tokens.append(data[start:position])
    return tokens, position


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    """Pixels of a plain (P2) or binary (P5) PGM file scaled by maxval to [0,1]."""

    path = Path(path)
    try:
        data = path.read_bytes()
        tokens, position = _pgm_tokens(data, 4)
        magic = tokens[0]
        width, height, maxval = (int(token) for token in tokens[1:])
        if magic not in (b'P2', b'P5'):
            raise ValueError(f'unsupported magic number {magic!r}')
        if width <= 0 or height <= 0 or not 0 < maxval < 65536:
            raise ValueError(f'invalid header {width}x{height} maxval {maxval}')
        count = width * height
        if magic == b'P2':
            values = np.array([float(token) for token in data[position:].split()[:count]])
        else:
            # One whitespace byte separates the header from the raster
            raster = data[position + 1:]
            dtype = np.dtype('u1') if maxval < 256 else np.dtype('>u2')
            values = np.frombuffer(raster, dtype=dtype, count=min(count, len(raster) // dtype.itemsize))
            values = values.astype(np.float64)
        if values.shape[0] != count:
            raise ValueError(f'expected {count} pixels, found {values.shape[0]}')
        if (values > maxval).any():
            raise ValueError(f'pixel values exceed maxval {maxval}')
    except (OSError, ValueError) as O_o:
        raise IngestionError(f'cannot read image {path}: {O_o}') from O_o
    return (values / maxval).reshape(height, width)


def load_images(directory: Union[str, Path], side: Optional[int] = None) -> NonnegMatrix:
    """
    Stack the square grayscale images of `directory` as columns (side^2 x count).

    Files are taken in lexicographic order and flattened row-major. Without
    `side` the size of the first image is used; every image must match it.
    """

    directory = Path(directory)
    if not directory.is_dir():
        raise IngestionError(f'image directory {directory} does not exist')
    files = sorted(path for path in directory.iterdir() if path.suffix.lower() in PGM_SUFFIXES)
    if not files:
        raise IngestionError(f'no PGM images in {directory}')

    columns = []
    for path in files:
        image = read_pgm(path)
        if image.shape[0] != image.shape[1]:
            raise IngestionError(f'image {path} is {image.shape[1]}x{image.shape[0]}, expected a square image')
        if side is None:
            side = image.shape[0]
        if image.shape[0] != side:
            raise IngestionError(f'image {path} is {image.shape[0]}x{image.shape[0]}, expected {side}x{side}')
        columns.append(image.reshape(-1))
    logger.info('loaded %d images of %dx%d from %s', len(columns), side, side, directory)
    return NonnegMatrix(data=np.stack(columns, axis=1))
