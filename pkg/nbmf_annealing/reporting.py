"""
Output writers.

Every report file is written to a temporary name first and renamed into
place, so readers never see a half written file and a failed run leaves
nothing behind.
"""
import contextlib
import csv
import io
import json
import logging
import os
import platform
import shutil
import tempfile
from collections.abc import Generator, Iterable, Sequence
from importlib import metadata
from pathlib import Path
from typing import Any, Union

import numpy as np
import scipy

from nbmf_annealing.constants import HISTOGRAM_HEADER, PACKAGE_NAME

logger = logging.getLogger(__name__)

Cell = Union[None, bool, int, float, str]


def package_version() -> str:
    try:
        return metadata.version(PACKAGE_NAME)
    except metadata.PackageNotFoundError:
        return '0+unknown'


def environment_versions() -> dict[str, str]:
    return {
        PACKAGE_NAME: package_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'python': platform.python_version(),
    }


def _cell(value: Cell) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def format_csv(header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f'row has {len(row)} cells, header has {len(header)}')
        writer.writerow([_cell(value) for value in row])
    return buffer.getvalue()


def write_atomic(path: Union[str, Path], text: str) -> Path:
    """Write `text` next to `path` under a temporary name, then rename it over `path`."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
    try:
        with os.fdopen(handle, 'w', encoding='utf-8', newline='\n') as stream:
            stream.write(text)
        os.replace(temporary, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(temporary)
        raise
    logger.info('wrote %s', path)
    return path


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> Path:
    return write_atomic(path, format_csv(header, rows))


def write_json(path: Union[str, Path], payload: Any) -> Path:
    return write_atomic(path, json.dumps(payload, indent=2, sort_keys=True, default=str) + '\n')


def histogram_rows(counts: np.ndarray) -> list[tuple[float, float, int]]:
    edges = np.linspace(0.0, 1.0, counts.shape[0] + 1)
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(counts.shape[0])]


def write_histogram(path: Union[str, Path], counts: np.ndarray) -> Path:
    return write_csv(path, HISTOGRAM_HEADER, histogram_rows(counts))


@contextlib.contextmanager
def staged_output(output_dir: Union[str, Path]) -> Generator[Path, None, None]:
    """
    Collect the files of one run in a staging directory.

    On success every staged file is moved into `output_dir`; on failure the
    staging directory is removed and `output_dir` is left as it was.
    """

    output_dir = Path(output_dir)
    output_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f'.{output_dir.name}.staging-', dir=output_dir.parent))
    try:
        yield staging
        output_dir.mkdir(parents=True, exist_ok=True)
        for source in sorted(staging.rglob('*')):
            if source.is_dir():
                continue
            target = output_dir / source.relative_to(staging)
            target.parent.mkdir(parents=True, exist_ok=True)
            os.replace(source, target)
        logger.info('results written to %s', output_dir)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
