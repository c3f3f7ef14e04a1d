"""
trajlet.models.compat

Pydantic compatibility layer for supporting both v1.10 and v2.x, trimmed to
what the trajlet configuration models use.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from typing import Any, Callable, Dict, Optional, Type, TypeVar

from pydantic import BaseModel as _BaseModel, Field


__all__ = (
    'BaseModel',
    'StrictModel',
    'Field',
    'field_validator',
    'parse_model',
    'replace_model',
)


T = TypeVar('T', bound=_BaseModel)


try:
    # Pydantic v2 imports
    from pydantic import ConfigDict
    from pydantic import field_validator


    class BaseModel(_BaseModel):
        model_config = ConfigDict(
            validate_by_alias=True,
            validate_by_name=True,
            use_enum_values=True)


    class StrictModel(_BaseModel):
        model_config = ConfigDict(
            validate_by_alias=True,
            validate_by_name=True,
            use_enum_values=True,
            extra='forbid')


except ImportError:
    # Pydantic v1.10 compatibility
    from pydantic import validator as _validator


    class BaseModel(_BaseModel):  # type: ignore

        class Config:
            allow_population_by_field_name = True
            use_enum_values = True

        def __init__(self, *args, **kwargs):
            super().__init__(*args, **kwargs)
            self.model_post_init(None)

        def model_post_init(self, __context: Any):
            pass

        @classmethod
        def model_validate(  # type: ignore
                cls: Type[T],
                data: Dict[str, Any]) -> T:
            return cls.parse_obj(data)

        def model_dump(  # type: ignore
                self,
                **kwargs: Any) -> Dict[str, Any]:
            return self.dict(**kwargs)


    def field_validator(  # type: ignore
            field: str,
            *fields: str,
            mode: str = 'after',
            check_fields: Optional[bool] = None) -> Callable:
        """
        Compatibility wrapper for pydantic v1 validator.

        Translates v2's field_validator to v1's validator decorator.
        """

        pre = (mode == 'before')

        def decorator(func: Callable) -> Callable:
            if pre:
                work = func
            else:
                work = lambda cls, v, values=None: func(cls, v)
            return _validator(field, *fields, pre=pre,
                              always=True, allow_reuse=True)(work)

        return decorator


    class StrictModel(BaseModel):  # type: ignore

        class Config:
            allow_population_by_field_name = True
            use_enum_values = True
            extra = 'forbid'


def parse_model(
        cls: Type[T],
        data: Dict[str, Any],
        what: Optional[str] = None,
        filename: Optional[str] = None) -> T:
    """
    Validate ``data`` into an instance of ``cls``, converting pydantic
    validation failures and the ValueErrors raised by cross-field checks in
    ``model_post_init`` into a :class:`trajlet.exceptions.ConfigError`.

    :param cls: The model class
    :param data: The raw mapping
    :param what: Name used in the error message, defaults to the class name
    :param filename: Optional file the mapping was loaded from
    :raises ConfigError: If validation fails
    """

    # delayed, the exceptions module imports pydantic itself
    from ..exceptions import ConfigError

    try:
        return cls.model_validate(data)
    except ValueError as e:
        raise ConfigError(e, what or cls.__name__, filename=filename) from e


def replace_model(model: T, **changes: Any) -> T:
    """
    Return a freshly validated copy of ``model`` with ``changes`` applied.
    Unlike ``model_copy(update=...)`` the result goes through validation
    and the cross-field checks again.
    """

    data = model.model_dump()
    data.update(changes)
    return parse_model(type(model), data)


# The end.
