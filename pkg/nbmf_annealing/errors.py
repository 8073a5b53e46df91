from typing import Optional, Union

Location = tuple[Union[int, str], ...]


class NbmfError(Exception):
    """Base class for all errors raised by this package."""

    code: str = 'nbmf'

    def __init__(self, message: str, *, code: Optional[str] = None) -> None:
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code


class DimensionError(NbmfError, ValueError):
    code = 'dimension-mismatch'


class ColumnIndexError(NbmfError, IndexError):
    code = 'column-index'


class FeasibilityError(NbmfError, ValueError):
    code = 'infeasible-start'


class NumericError(NbmfError, ArithmeticError):
    code = 'non-finite'


class CapacityError(NbmfError, ValueError):
    code = 'capacity'


class ParameterError(NbmfError, ValueError):
    code = 'parameter'


class SizingError(NbmfError, ValueError):
    code = 'sizing'


class IngestionError(NbmfError, OSError):
    code = 'ingestion'


class EvaluationError(NbmfError, ValueError):
    code = 'evaluation'


class RangeError(NbmfError, ValueError):
    code = 'range'


class ConfigurationError(NbmfError, ValueError):
    """
    Invalid configuration.

    `details` holds `(loc, msg)` pairs, one per offending setting, so the CLI
    can print every problem at once.
    """

    code = 'configuration'

    def __init__(
        self,
        message: str,
        *,
        details: Optional[list[tuple[Location, str]]] = None,
    ) -> None:
        super().__init__(message)
        self.details = details if details is not None else []


class QuboFormatError(NbmfError, ValueError):
    code = 'qubo-format'

    def __init__(self, message: str, *, line: int) -> None:
        super().__init__(f'line {line}: {message}')
        self.line = line


def shape_mismatch(what: str, **shapes: tuple[int, ...]) -> DimensionError:
    """Build a `DimensionError` naming all offending shapes."""

    listed = ', '.join(f'{name}={shape}' for name, shape in shapes.items())
    return DimensionError(f'{what}: dimensions do not conform ({listed})')
