"""
Run configuration.

Configuration files are flat UTF-8 `key=value` lines with dotted section
prefixes:

    # faces run
    dataset.kind=images
    dataset.path=faces/
    als.rank=35
    als.solvers.ra_schedule.reversal_distance=0.3
    methods=Exact,PGDRound,RA+PGD

Blank lines and `#` comments are ignored, lists are comma separated. A
preset, the file and command-line overrides are merged in that order and the
result is validated by the pydantic models below. Filesystem conditions
(dataset present, output directory writable) are checked separately by
`await config.model_async_check()`.
"""
import asyncio
import logging
import os
from collections.abc import Generator, Iterable, Mapping
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import pydantic
from pydantic import ValidationError

from nbmf_annealing.als import AlsConfig
from nbmf_annealing.checks import async_field_check, async_model_check
from nbmf_annealing.constants import SYNTHETIC_OUTPUT_DIR, THREADS_ENV_VAR
from nbmf_annealing.core import MAX_SEED, NonnegMatrix, read_matrix_csv
from nbmf_annealing.datagen import PGM_SUFFIXES, SyntheticSpec, derived_rows, generate_dataset, load_images
from nbmf_annealing.errors import ConfigurationError, Location, SizingError
from nbmf_annealing.mixins import AsyncCheckModelMixin
from nbmf_annealing.pgd import PgdConfig
from nbmf_annealing.results import SolverKind
from nbmf_annealing.solvers import SolverConfig
from nbmf_annealing.utils import prefix_errors

logger = logging.getLogger(__name__)

ConfigTree = dict[str, Any]

ALL_METHODS = ','.join(kind.value for kind in SolverKind)

PRESETS: dict[str, ConfigTree] = {
    'paper-faces': {
        'dataset': {'kind': 'images', 'side': '19'},
        'als': {'rank': '35', 'max_iterations': '20', 'rel_tol': '0'},
        'methods': ALL_METHODS,
    },
    'paper-synthetic': {
        'dataset': {'kind': 'synthetic', 'n': '110', 'k': '10', 'rho': '0.5'},
        'als': {'rank': '10', 'solvers': {'exact_time_limit': '60'}},
        'study': {'n': '110', 'ks': '10,20,30,40', 'rhos': '0.5,1,2,10', 'time_limit': '60'},
    },
}


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV_VAR, '').strip()
    if not value:
        return 1
    try:
        threads = int(value)
    except ValueError:
        logger.warning('ignoring %s=%r, expected a positive integer', THREADS_ENV_VAR, value)
        return 1
    return max(threads, 1)


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(',') if item.strip()]
    return value


def _with_seed(section: ConfigTree, seed: Any) -> ConfigTree:
    """Copy of `section` whose `seed.master_seed` defaults to `seed`."""

    section = dict(section)
    own = section.get('seed')
    if own is None or isinstance(own, dict):
        section['seed'] = {'master_seed': seed, **(own or {})}
    return section


class CsvSource(AsyncCheckModelMixin):
    model_config = pydantic.ConfigDict(frozen=True)

    kind: Literal['csv'] = 'csv'
    path: Path

    @async_field_check('path')
    async def check_path(self, value: Path) -> None:
        if not await asyncio.to_thread(value.is_file):
            raise ValueError(f'dataset file {value} does not exist')
        if (await asyncio.to_thread(value.stat)).st_size == 0:
            raise ValueError(f'dataset file {value} is empty')

    def load(self) -> NonnegMatrix:
        return NonnegMatrix(data=read_matrix_csv(self.path))


class ImageSource(AsyncCheckModelMixin):
    model_config = pydantic.ConfigDict(frozen=True)

    kind: Literal['images'] = 'images'
    path: Path
    side: Optional[int] = pydantic.Field(default=None, gt=0)

    @async_field_check('path')
    async def check_path(self, value: Path) -> None:
        if not await asyncio.to_thread(value.is_dir):
            raise ValueError(f'image directory {value} does not exist')

        def has_images() -> bool:
            return any(path.suffix.lower() in PGM_SUFFIXES for path in value.iterdir())

        if not await asyncio.to_thread(has_images):
            raise ValueError(f'image directory {value} holds no PGM images')

    def load(self) -> NonnegMatrix:
        return load_images(self.path, self.side)


class SyntheticSource(SyntheticSpec):
    kind: Literal['synthetic'] = 'synthetic'

    def load(self) -> NonnegMatrix:
        return generate_dataset(self).V


DatasetSource = Annotated[Union[CsvSource, ImageSource, SyntheticSource], pydantic.Field(discriminator='kind')]


class EmitFlags(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    trajectory: bool = True
    hamming: bool = True
    histograms: bool = True
    qubo_dumps: bool = False
    histogram_bins: int = pydantic.Field(default=20, gt=0)


class CalibrationConfig(pydantic.BaseModel):
    """
    Reversal-distance sweep.

    Column subproblems come from the W of `warmup_iterations` PGDRound ALS
    iterations; every distance runs `reads` reverse anneals per column from
    the state `method` would start from.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    distances: list[float] = pydantic.Field(default=[0.0, 0.15, 0.3, 0.45, 0.6, 0.8, 1.0], min_length=1)
    method: SolverKind = SolverKind.RA_PGD
    warmup_iterations: int = pydantic.Field(default=1, gt=0)
    reads: int = pydantic.Field(default=100, gt=0)
    columns: Optional[int] = pydantic.Field(default=None, gt=0)

    @pydantic.field_validator('distances', mode='before')
    @classmethod
    def _split_distances(cls, value: Any) -> Any:
        return _split_list(value)

    @pydantic.field_validator('distances')
    @classmethod
    def _validate_distances(cls, value: list[float]) -> list[float]:
        for distance in value:
            if not 0.0 <= distance <= 1.0:
                raise ValueError(f'reversal distance {distance} outside [0, 1]')
        return value

    @pydantic.field_validator('method')
    @classmethod
    def _validate_method(cls, value: SolverKind) -> SolverKind:
        if value not in (SolverKind.RA, SolverKind.RA_PGD):
            raise ValueError(f'calibration needs a reverse annealing method (RA or RA+PGD), got {value.value}')
        return value


class RunConfig(AsyncCheckModelMixin):
    """
    Everything `factorize` and `calibrate` need.

    `seed` and `threads` are copied into the ALS and synthetic dataset
    sections unless those set their own.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    seed: int = pydantic.Field(default=0, ge=0, le=MAX_SEED)
    threads: int = pydantic.Field(default_factory=default_threads, ge=1)
    dataset: DatasetSource
    als: AlsConfig
    methods: list[SolverKind] = pydantic.Field(default=[SolverKind.EXACT, SolverKind.RA_PGD], min_length=1)
    output_dir: Path = Path('results')
    emit: EmitFlags = EmitFlags()
    calibration: CalibrationConfig = CalibrationConfig()

    @pydantic.model_validator(mode='before')
    @classmethod
    def _share_seed_and_threads(cls, values: Any) -> Any:
        if not isinstance(values, dict):
            return values
        values = dict(values)
        seed = values.get('seed', 0)
        if isinstance(values.get('als'), dict):
            als = _with_seed(values['als'], seed)
            als.setdefault('threads', values.get('threads', default_threads()))
            values['als'] = als
        dataset = values.get('dataset')
        if isinstance(dataset, dict) and dataset.get('kind') == 'synthetic':
            values['dataset'] = _with_seed(dataset, seed)
        return values

    @pydantic.field_validator('methods', mode='before')
    @classmethod
    def _split_methods(cls, value: Any) -> Any:
        return _split_list(value)

    @async_model_check()
    async def check_output_dir(self) -> None:
        def problem() -> Optional[str]:
            target = self.output_dir.resolve()
            if target.exists() and not target.is_dir():
                return f'output path {self.output_dir} exists and is not a directory'
            existing = target
            while not existing.exists():
                existing = existing.parent
            if not os.access(existing, os.W_OK):
                return f'output directory {self.output_dir} is not writable'
            return None

        message = await asyncio.to_thread(problem)
        if message is not None:
            raise ValueError(message)


class StudyConfig(pydantic.BaseModel):
    """Grid of synthetic (k, rho) cells for the relaxation accuracy study."""

    model_config = pydantic.ConfigDict(frozen=True)

    n: int = pydantic.Field(default=110, gt=0)
    ks: list[int] = pydantic.Field(default=[10, 20, 30, 40], min_length=1)
    rhos: list[float] = pydantic.Field(default=[0.5, 1.0, 2.0, 10.0], min_length=1)
    theta: float = pydantic.Field(default=1.0, gt=0)
    time_limit: float = pydantic.Field(default=60.0, gt=0)
    columns: Optional[int] = pydantic.Field(default=None, gt=0)
    histogram_bins: int = pydantic.Field(default=20, gt=0)

    @pydantic.field_validator('ks', 'rhos', mode='before')
    @classmethod
    def _split_grid(cls, value: Any) -> Any:
        return _split_list(value)

    @pydantic.model_validator(mode='after')
    def _validate_cells(self) -> 'StudyConfig':
        for k in self.ks:
            try:
                derived_rows(self.n, k)
            except SizingError as O_o:
                raise ValueError(O_o.message) from O_o
        for rho in self.rhos:
            if not rho > 0:
                raise ValueError(f'rho must be positive, got {rho}')
        return self


class StudyRunConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    seed: int = pydantic.Field(default=0, ge=0, le=MAX_SEED)
    threads: int = pydantic.Field(default_factory=default_threads, ge=1)
    output_dir: Path = Path('results')
    study: StudyConfig = StudyConfig()
    relaxation: PgdConfig = PgdConfig()


class GenSynthConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    n: int = pydantic.Field(gt=0)
    k: int = pydantic.Field(gt=0)
    rho: float = pydantic.Field(gt=0, allow_inf_nan=False)
    theta: float = pydantic.Field(default=1.0, gt=0, allow_inf_nan=False)
    seed: int = pydantic.Field(default=0, ge=0, le=MAX_SEED)
    output_dir: Path = Path(SYNTHETIC_OUTPUT_DIR)

    @pydantic.model_validator(mode='after')
    def _validate_sizing(self) -> 'GenSynthConfig':
        try:
            derived_rows(self.n, self.k)
        except SizingError as O_o:
            raise ValueError(O_o.message) from O_o
        return self

    def spec(self) -> SyntheticSpec:
        return SyntheticSpec(n=self.n, k=self.k, rho=self.rho, theta=self.theta, seed={'master_seed': self.seed})


class SolveQuboConfig(SolverConfig):
    """Solver parameters of `solve-qubo`; the schedule keys sit at the top level."""

    seed: int = pydantic.Field(default=0, ge=0, le=MAX_SEED)
    solver: SolverKind = SolverKind.EXACT


def parse_config_text(text: str, *, source: str = '<config>') -> ConfigTree:
    """Parse `key=value` lines into a nested dict of strings."""

    result: ConfigTree = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            raise ConfigurationError(
                f'{source}:{line_number}: expected key=value',
                details=[((source, line_number), 'expected key=value')],
            )
        key, value = line.split('=', 1)
        set_dotted(result, key.strip(), value.strip(), source=f'{source}:{line_number}')
    return result


def read_config_file(path: Union[str, Path]) -> ConfigTree:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except (OSError, UnicodeDecodeError) as O_o:
        raise ConfigurationError(f'cannot read config file {path}: {O_o}') from O_o
    return parse_config_text(text, source=str(path))


def set_dotted(target: ConfigTree, key: str, value: Any, *, source: str = '<override>') -> None:
    parts = key.split('.')
    if not all(parts):
        raise ConfigurationError(f'{source}: invalid key {key!r}', details=[((key,), 'invalid key')])
    node = target
    for index, part in enumerate(parts[:-1]):
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            prefix = '.'.join(parts[:index + 1])
            raise ConfigurationError(
                f'{source}: {key!r} conflicts with the value of {prefix!r}',
                details=[(tuple(parts), f'{prefix} already holds a value')],
            )
        node = child
    if isinstance(node.get(parts[-1]), dict):
        raise ConfigurationError(
            f'{source}: {key!r} is a section, not a value',
            details=[(tuple(parts), 'is a section')],
        )
    node[parts[-1]] = value


def parse_overrides(arguments: Iterable[str]) -> ConfigTree:
    """
    Turn `--a.b=value` and `--a.b value` arguments into a nested dict.

    A flag without a value (`--emit.qubo_dumps`) means `true`.
    """

    result: ConfigTree = {}
    pending = list(arguments)
    while pending:
        argument = pending.pop(0)
        if not argument.startswith('--') or len(argument) == 2:
            raise ConfigurationError(f'unexpected argument {argument!r}', details=[((argument,), 'unexpected')])
        body = argument[2:]
        if '=' in body:
            key, value = body.split('=', 1)
        elif pending and not pending[0].startswith('--'):
            key, value = body, pending.pop(0)
        else:
            key, value = body, 'true'
        set_dotted(result, key.replace('-', '_'), value, source='command line')
    return result


def merge(*layers: Mapping[str, Any]) -> ConfigTree:
    """Deep-merge config dicts; later layers win."""

    result: ConfigTree = {}
    for layer in layers:
        for key, value in layer.items():
            if isinstance(value, Mapping) and isinstance(result.get(key), dict):
                result[key] = merge(result[key], value)
            elif isinstance(value, Mapping):
                result[key] = merge(value)
            else:
                result[key] = value
    return result


def preset(name: Optional[str]) -> ConfigTree:
    if name is None:
        return {}
    if name not in PRESETS:
        raise ConfigurationError(
            f'unknown preset {name!r}, choose from {", ".join(sorted(PRESETS))}',
            details=[(('preset',), 'unknown preset')],
        )
    return merge(PRESETS[name])


def _details(errors: list[Any]) -> list[tuple[Location, str]]:
    return [(tuple(error.get('loc', ())), str(error.get('msg', error.get('type', '')))) for error in errors]


@contextmanager
def ensure_configuration_errors(
    prefix: Optional[Union[Location, str]] = None,
) -> Generator[None, None, None]:
    """
    Converter for `ValidationError` to `ConfigurationError`.

    Any `ValidationError` raised inside the block becomes a
    `ConfigurationError` whose details list every failing location, prefixed
    with `prefix`:

    ```python
    with ensure_configuration_errors('als'):
        AlsConfig.model_validate(section)
    ```
    """

    try:
        yield
    except ValidationError as O_o:
        prepared_errors = O_o.errors(include_url=False)

        if prefix is not None:
            if isinstance(prefix, str):
                prefix = (prefix,)
            prepared_errors = prefix_errors(prefix, prepared_errors)  # type: ignore[assignment]

        details = _details(prepared_errors)  # type: ignore[arg-type]
        lines = [f'{".".join(str(part) for part in loc) or "<root>"}: {message}' for loc, message in details]
        raise ConfigurationError(
            'invalid configuration:\n  ' + '\n  '.join(lines),
            details=details,
        ) from O_o


def build_config(model: type[pydantic.BaseModel], *layers: Mapping[str, Any]) -> Any:
    with ensure_configuration_errors():
        return model.model_validate(merge(*layers))
