from functools import wraps
from inspect import Parameter, signature
from typing import Callable, Union, cast

from pydantic import PydanticUserError
from pydantic_core import ErrorDetails, InitErrorDetails, PydanticCustomError

from nbmf_annealing.errors import Location

FIELD_CHECK_KWARGS = frozenset({'value', 'field', 'config'})
MODEL_CHECK_KWARGS = frozenset({'config'})


def _generic_check(check_func: Callable, allowed: frozenset[str], usage: str) -> Callable:
    """
    Return a wrapper that is always called with every argument in `allowed`
    and forwards only those the check declares.
    """

    sig = signature(check_func)
    parameters = list(sig.parameters.values())
    if not parameters or parameters[0].name == 'cls':
        raise PydanticUserError(
            f'check {check_func.__qualname__}{sig} must be an instance method, expected {usage}',
            code='validator-signature',
        )

    rest = parameters[1:]
    declared = {parameter.name for parameter in rest if parameter.kind is not Parameter.VAR_KEYWORD}
    unknown = declared - allowed
    if unknown:
        raise PydanticUserError(
            f'check {check_func.__qualname__}{sig} takes unknown argument(s) {sorted(unknown)}, expected {usage}',
            code='validator-signature',
        )
    forwarded = allowed if any(parameter.kind is Parameter.VAR_KEYWORD for parameter in rest) else declared

    @wraps(check_func)
    def wrapper(self: object, **arguments: object) -> object:
        return check_func(self, **{name: arguments[name] for name in forwarded})

    return wrapper


def make_generic_field_check(check_func: Callable) -> Callable:
    return _generic_check(
        check_func,
        FIELD_CHECK_KWARGS,
        '(self, value, field, config) with "value", "field" and "config" optional',
    )


def make_generic_model_check(check_func: Callable) -> Callable:
    return _generic_check(check_func, MODEL_CHECK_KWARGS, '(self, config) with "config" optional')


def _with_prefix(prefix: Location, error: Union[InitErrorDetails, ErrorDetails]) -> InitErrorDetails:
    details = dict(error)
    details['loc'] = (*prefix, *error.get('loc', ()))
    # Rendered errors carry their type as a string, InitErrorDetails need an error object
    if 'msg' in error and isinstance(error['type'], str):
        details['type'] = PydanticCustomError(error['type'], cast(ErrorDetails, error)['msg'])
    return cast(InitErrorDetails, details)


def prefix_errors(
    prefix: Location,
    errors: Union[list[InitErrorDetails], list[ErrorDetails]],
) -> list[InitErrorDetails]:
    """
    Extend the location of every error with `prefix`, used to report the
    errors of child models under the parent's field.
    """

    return [_with_prefix(prefix, error) for error in errors]
