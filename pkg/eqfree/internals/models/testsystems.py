"""
Small systems with known answers, wrapped as microscopic models.

Each system lifts and restricts trivially unless noted, so equation-free
results can be compared with closed forms.
"""

from dataclasses import dataclass

import numpy as np

from eqfree.errors import ConfigError
from eqfree.internals.microsim import MicroSystem
from eqfree.internals.operators import EqFreeConfig, Model


@dataclass(frozen=True)
class TestParams:
    """
    Parameters shared by the test systems.

    `p` and `c` are the bifurcation parameters, `p2` a second one for the
    Hopf normal form, `rate` a decay rate, `fast` the fast rate of the
    slow-fast system, `omega` an angular frequency.
    """

    __test__ = False

    system: str = "fold"
    p: float = 1.0
    c: float = 0.0
    p2: float = 0.0
    rate: float = 1.0
    fast: float = 100.0
    omega: float = 1.0
    lift_mix: float = 0.0

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigError(
                f"unknown test system {self.system!r}, expected one of {sorted(SYSTEMS)}"
            )


def fold_rhs(u, params):
    """
    x' = p - x^2 + c.
    """
    return params.p - u**2 + params.c


def pitchfork_rhs(u, params):
    """
    x' = p x - x^3.
    """
    return params.p * u - u**3


def relaxation_rhs(u, params):
    """
    x' = p - x.
    """
    return params.p - u


def decay_rhs(u, params):
    """
    x' = -rate x.
    """
    return -params.rate * u


def slow_fast_rhs(u, params):
    """
    Slow and fast coordinates decaying independently.
    """
    return np.array([-params.rate * u[0], -params.fast * u[1]])


def hopf_rhs(u, params):
    """
    Hopf normal form with r' = (p - p2) r - r^3 and angular speed omega.
    """
    x, y = u
    r2 = x * x + y * y
    mu = params.p - params.p2
    return np.array([mu * x - params.omega * y - r2 * x, params.omega * x + mu * y - r2 * y])


def oscillator_rhs(u, params):
    """
    Harmonic oscillator q' = v, v' = -omega^2 q.
    """
    return np.array([u[1], -(params.omega**2) * u[0]])


def _slow_fast_lift(x, params):
    # R(u) = s + f; lift_mix puts a share of x on the fast coordinate.
    return np.array([(1.0 - params.lift_mix) * x[0], params.lift_mix * x[0]])


def _slow_fast_restrict(u, params):
    del params
    return np.array([u[0] + u[1]])


def _identity(x, params):
    del params
    return np.array(x, dtype=float)


# name: (rhs, micro dimension, macro dimension, lift, restrict)
SYSTEMS = {
    "fold": (fold_rhs, 1, 1, _identity, _identity),
    "pitchfork": (pitchfork_rhs, 1, 1, _identity, _identity),
    "relaxation": (relaxation_rhs, 1, 1, _identity, _identity),
    "decay": (decay_rhs, 1, 1, _identity, _identity),
    "slowfast": (slow_fast_rhs, 2, 1, _slow_fast_lift, _slow_fast_restrict),
    "hopf": (hopf_rhs, 2, 2, _identity, _identity),
    "oscillator": (oscillator_rhs, 2, 2, _identity, _identity),
}


class TestSystemModel(Model):
    """
    One of the closed-form test systems, selected by `TestParams.system`.

    The macroscopic dimension depends on the system, so a model instance is
    bound to one system name.
    """

    __test__ = False

    name = "testsystem"
    parameters = TestParams

    def __init__(self, system: str = "fold"):
        if system not in SYSTEMS:
            raise ConfigError(f"unknown test system {system!r}")
        self.system_name = system
        self.macro_dim = SYSTEMS[system][2]

    def default_params(self) -> TestParams:
        return TestParams(system=self.system_name)

    def _check(self, params: TestParams):
        if params.system != self.system_name:
            raise ConfigError(
                f"model bound to {self.system_name!r} got parameters for {params.system!r}"
            )
        return SYSTEMS[params.system]

    def system(self, params: TestParams) -> MicroSystem:
        rhs, dim, _, _, _ = self._check(params)
        return MicroSystem(rhs, dim, params)

    def lift(self, x, params: TestParams) -> np.ndarray:
        return self._check(params)[3](np.atleast_1d(x), params)

    def restrict(self, u, params: TestParams) -> np.ndarray:
        return self._check(params)[4](np.atleast_1d(u), params)

    def default_eqfree(self) -> EqFreeConfig:
        return EqFreeConfig(t_skip=1.0, t0=1.0, dt=1e-3)

    def __repr__(self):
        return f"<Model name={self.name!r} system={self.system_name!r}>"
