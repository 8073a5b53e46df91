from typing import Any, Callable, Optional

from pydantic.errors import PydanticUserError

from nbmf_annealing.constants import ASYNC_FIELD_CHECK_CONFIG_KEY, ASYNC_MODEL_CHECK_CONFIG_KEY
from nbmf_annealing.utils import make_generic_field_check, make_generic_model_check


class CheckInfo:
    """
    A registered check: the adapted function, the fields it covers (empty for
    model checks) and the extra keyword arguments given to the decorator.

    Checks that declare a `config` parameter receive this object.
    """

    __slots__ = ('extra', 'fields', 'func')

    def __init__(
        self,
        func: Callable,
        *,
        fields: tuple[str, ...] = (),
        extra: Optional[dict[str, Any]] = None,
    ) -> None:
        self.func = func
        self.fields = fields
        self.extra = extra if extra is not None else {}

    def __repr__(self) -> str:
        return f'CheckInfo({self.func.__name__}, fields={self.fields!r}, extra={self.extra!r})'


def _register(func: Callable, key: str, info: CheckInfo) -> Callable:
    setattr(func, key, info)
    return func


def async_field_check(
    __field_name: str,
    /,
    *additional_field_names: str,
    **extra: Any,
) -> Callable[[Callable], Callable]:
    """
    Register a method as deferred check of one or more fields.

    Field checks run when `model_async_check()` is awaited, not while the model
    is built, so they may touch the filesystem.
    """

    if not isinstance(__field_name, str):
        raise PydanticUserError(
            "async_field_check needs the names of the fields it checks, "
            "use `@async_field_check('<field_name>', ...)`",
            code='validator-no-fields',
        )
    fields = (__field_name, *additional_field_names)

    def register(func: Callable) -> Callable:
        return _register(
            func,
            ASYNC_FIELD_CHECK_CONFIG_KEY,
            CheckInfo(make_generic_field_check(func), fields=fields, extra=extra),
        )

    return register


def async_model_check(**extra: Any) -> Callable[[Callable], Callable]:
    """Register a method as deferred check of the whole model."""

    def register(func: Callable) -> Callable:
        return _register(
            func,
            ASYNC_MODEL_CHECK_CONFIG_KEY,
            CheckInfo(make_generic_model_check(func), extra=extra),
        )

    return register
