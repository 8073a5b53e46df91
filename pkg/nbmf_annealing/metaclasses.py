from typing import Any

from pydantic._internal._model_construction import ModelMetaclass

from nbmf_annealing.checks import CheckInfo
from nbmf_annealing.constants import (
    ASYNC_FIELD_CHECK_CONFIG_KEY,
    ASYNC_FIELD_CHECKS_KEY,
    ASYNC_MODEL_CHECK_CONFIG_KEY,
    ASYNC_MODEL_CHECKS_KEY,
)


def _registered(namespace: dict[str, Any], key: str) -> list[CheckInfo]:
    return [
        info
        for info in (getattr(member, key, None) for member in namespace.values())
        if isinstance(info, CheckInfo)
    ]


class AsyncCheckModelMetaclass(ModelMetaclass):
    """
    Stores the `CheckInfo`s of all async checks on the class, base class
    checks first.
    """

    def __new__(
        mcs,
        name: str,
        bases: tuple[type],
        namespace: dict[str, Any],
        **kwargs: Any,
    ) -> Any:
        field_checks: list[CheckInfo] = []
        model_checks: list[CheckInfo] = []
        for base in bases:
            field_checks.extend(getattr(base, ASYNC_FIELD_CHECKS_KEY, ()))
            model_checks.extend(getattr(base, ASYNC_MODEL_CHECKS_KEY, ()))

        namespace[ASYNC_FIELD_CHECKS_KEY] = field_checks + _registered(namespace, ASYNC_FIELD_CHECK_CONFIG_KEY)
        namespace[ASYNC_MODEL_CHECKS_KEY] = model_checks + _registered(namespace, ASYNC_MODEL_CHECK_CONFIG_KEY)

        return super().__new__(mcs, name, bases, namespace, **kwargs)
