from collections.abc import Iterator
from typing import Any, ClassVar

import pydantic
from pydantic_core import InitErrorDetails, PydanticCustomError, ValidationError

from nbmf_annealing.checks import CheckInfo
from nbmf_annealing.errors import Location
from nbmf_annealing.metaclasses import AsyncCheckModelMetaclass
from nbmf_annealing.utils import prefix_errors


def _value_error(message: str, loc: Location, value: Any) -> InitErrorDetails:
    return InitErrorDetails(
        type=PydanticCustomError('value_error', message),  # type: ignore
        loc=loc,
        input=value,
    )


class AsyncCheckModelMixin(
    pydantic.BaseModel,
    metaclass=AsyncCheckModelMetaclass,
):
    # MUST match names defined in constants.py!
    nbmf_model_async_field_checks: ClassVar[list[CheckInfo]]
    nbmf_model_async_model_checks: ClassVar[list[CheckInfo]]

    def _checked_children(self) -> Iterator[tuple[Location, 'AsyncCheckModelMixin']]:
        """Child models using the mixin, directly or inside lists, tuples and dicts."""

        for name, value in self.__dict__.items():
            if isinstance(value, AsyncCheckModelMixin):
                yield (name,), value
            elif isinstance(value, (list, tuple)):
                yield from (((name, index), item) for index, item in enumerate(value)
                            if isinstance(item, AsyncCheckModelMixin))
            elif isinstance(value, dict):
                yield from (((name, key), item) for key, item in value.items()
                            if isinstance(item, AsyncCheckModelMixin))

    async def model_async_check(self) -> None:
        """
        Run the deferred checks of the model instance.

        Calls all async field and async model checks, then recurses into child
        models that use this mixin, prefixing their error locations. All
        errors are collected and raised as one `ValidationError`.
        """

        errors: list[InitErrorDetails] = []

        for check in self.nbmf_model_async_field_checks:
            for field_name in check.fields:
                value = getattr(self, field_name, None)
                try:
                    await check.func(self, value=value, field=field_name, config=check)
                except (ValueError, AssertionError) as o_O:
                    errors.append(_value_error(str(o_O), (field_name,), value))

        for check in self.nbmf_model_async_model_checks:
            try:
                await check.func(self, config=check)
            except (ValueError, AssertionError) as o_O:
                errors.append(_value_error(str(o_O), ('__root__',), self.__dict__))

        for prefix, child in self._checked_children():
            try:
                await child.model_async_check()
            except ValidationError as O_o:
                errors.extend(prefix_errors(prefix, O_o.errors()))

        if errors:
            raise ValidationError.from_exception_data(self.__class__.__name__, errors)
