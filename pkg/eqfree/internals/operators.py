"""
Lifting, restriction and the settings of the equation-free schemes.
"""

import dataclasses
import functools
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from eqfree.errors import ConfigError
from eqfree.internals.microsim import DEFAULT_DT, MicroSystem, integrate


# pylint: disable=too-many-instance-attributes
@dataclass(frozen=True)
class EqFreeConfig:
    """
    Durations, finite-difference steps and Newton settings.

    `t0` defaults to `t_skip`.
    """

    t_skip: float = 100.0
    t0: Optional[float] = None
    delta: float = 1.0
    fd_step: float = 1e-4
    fd_floor: float = 1e-6
    newton_tol: float = 1e-8
    newton_max_iter: int = 20
    max_halvings: int = 8
    dt: float = DEFAULT_DT
    stability_band: float = 1e-3
    param_weight: float = 1.0
    cond_max: float = 1e10

    def __post_init__(self):
        if self.t0 is None:
            object.__setattr__(self, "t0", self.t_skip)
        for name in ("t_skip", "t0", "delta", "fd_step", "fd_floor", "newton_tol", "dt"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be positive and finite, got {value!r}")
        if self.newton_max_iter < 1:
            raise ConfigError("newton_max_iter must be at least 1")
        if self.max_halvings < 0:
            raise ConfigError("max_halvings must be non-negative")
        if not 0 <= self.stability_band < 1:
            raise ConfigError("stability_band must lie in [0, 1)")
        if self.param_weight <= 0:
            raise ConfigError("param_weight must be positive")

    def replace(self, **changes) -> "EqFreeConfig":
        """
        Copy with some fields changed.
        """
        return dataclasses.replace(self, **changes)

    def fd_steps(self, x: np.ndarray) -> np.ndarray:
        """
        Forward-difference increments per component of x.
        """
        return np.maximum(self.fd_step * np.abs(x), self.fd_floor)


@dataclass(frozen=True)
class OperatorPair:
    """
    Lifting and restriction bound to one microscopic system.
    """

    lift: Callable[[np.ndarray], np.ndarray]
    restrict: Callable[[np.ndarray], np.ndarray]
    system: MicroSystem
    macro_dim: int

    @property
    def micro_dim(self) -> int:
        """
        Dimension of the microscopic state.
        """
        return self.system.dim

    def evolve(self, u: np.ndarray, t: float, dt: float = DEFAULT_DT) -> np.ndarray:
        """
        Microscopic time stepper M(t, u).
        """
        return integrate(self.system, u, t, dt)


class Model:
    """
    A microscopic model together with its coarse observables.

    Subclasses set `name`, `macro_dim` and `parameters` (a dataclass type) and
    implement `system`, `lift` and `restrict`.
    """

    name = "model"
    macro_dim = 1
    parameters: Any = None

    def system(self, params) -> MicroSystem:
        """
        The microscopic system at the given parameters.
        """
        raise NotImplementedError("Model.system is not implemented")

    def lift(self, x: np.ndarray, params) -> np.ndarray:
        """
        Microscopic state for the macroscopic value x.
        """
        raise NotImplementedError("Model.lift is not implemented")

    def restrict(self, u: np.ndarray, params) -> np.ndarray:
        """
        Macroscopic value of the microscopic state u.
        """
        raise NotImplementedError("Model.restrict is not implemented")

    def default_params(self):
        """
        Parameter set with documented defaults.
        """
        return self.parameters()

    def default_eqfree(self) -> EqFreeConfig:
        """
        Equation-free settings suited to this model.
        """
        return EqFreeConfig()

    def operators(self, params) -> OperatorPair:
        """
        Bind lifting, restriction and the microscopic system to params.
        """
        return OperatorPair(
            lift=functools.partial(self.lift, params=params),
            restrict=functools.partial(self.restrict, params=params),
            system=self.system(params),
            macro_dim=self.macro_dim,
        )

    def __repr__(self):
        return f"<Model name={self.name!r}>"


@dataclass(frozen=True)
class ParameterFamily:
    """
    A model whose named parameters can be varied by continuation.
    """

    model: Model
    params: Any

    def value(self, name: str) -> float:
        """
        Current value of a named parameter.
        """
        if not hasattr(self.params, name):
            raise ConfigError(f"{self.model.name} has no parameter {name!r}")
        return float(getattr(self.params, name))

    def with_values(self, **values) -> "ParameterFamily":
        """
        Family with some parameters fixed to new values.
        """
        for name in values:
            self.value(name)
        return ParameterFamily(self.model, dataclasses.replace(self.params, **values))

    def at(self, **values) -> OperatorPair:
        """
        Operators at the given parameter values.
        """
        return self.model.operators(self.with_values(**values).params)


def as_macro(x, dim: int) -> np.ndarray:
    """
    Coerce x to a finite macroscopic state of dimension dim.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise ValueError(f"macroscopic state has shape {x.shape}, expected ({dim},)")
    if not np.isfinite(x).all():
        raise ValueError("macroscopic state is not finite")
    return x
