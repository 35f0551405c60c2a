"""
Miscellaneous utility functions that don't obviously belong anywhere else.
"""

import dataclasses
from typing import Optional, Sequence, Tuple

import numpy as np

from eqfree.errors import ConfigError
from eqfree.internals.operators import ParameterFamily


def cast_param(params, name: str, value):
    """
    Cast value to the type of the parameter field `name`.
    """
    for f in dataclasses.fields(params):
        if f.name == name:
            current = getattr(params, name)
            if isinstance(current, int) and not isinstance(current, bool):
                if float(value) != int(value):
                    raise ConfigError(f"{name} expects an integer, got {value!r}")
                return int(value)
            return float(value)
    raise ConfigError(f"{type(params).__name__} has no parameter {name!r}")


def with_param(family: ParameterFamily, name: str, value) -> ParameterFamily:
    """
    Family with one parameter set, cast to its field type.
    """
    return family.with_values(**{name: cast_param(family.params, name, value)})


def start_value(family: ParameterFamily, name: str, value: Optional[float]) -> float:
    """
    The given start value, or the current value of the parameter.
    """
    return family.value(name) if value is None else float(value)


def macro_start(x_start: Sequence[float], dim: int) -> np.ndarray:
    """
    Start state from the [task] section, zeros when not given.
    """
    if not x_start:
        return np.zeros(dim)
    if len(x_start) != dim:
        raise ConfigError(f"x_start has {len(x_start)} values, the model state has {dim}")
    return np.array(x_start, dtype=float)


def crossing(
    values: Sequence[float], levels: Sequence[float], level: float
) -> Optional[Tuple[int, float]]:
    """
    First upward crossing of `level` by `levels` along `values`, linearly
    interpolated; None if there is none.
    """
    for i in range(len(values) - 1):
        lo, hi = levels[i], levels[i + 1]
        if lo <= level < hi:
            theta = (level - lo) / (hi - lo)
            return i, float(values[i] + theta * (values[i + 1] - values[i]))
    return None
