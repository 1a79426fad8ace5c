# core/utils/functional.py
from typing import Callable, Any, TypeVar

T = TypeVar("T")


def pipeline(initial: T, steps: list[Callable[[Any], Any]]) -> Any:
    """Run a sequence of steps, feeding each result into the next."""
    result = initial
    for step in steps:
        result = step(result)
    return result


def keyword(fn: Callable[..., T], **kwargs) -> Callable[[Any], T]:
    """Bind keyword arguments so that fn fits a single-argument pipeline step."""
    return lambda x: fn(x, **kwargs)
