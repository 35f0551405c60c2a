"""
Deterministic fixed-step integration of microscopic systems.

`integrate` is the microscopic time stepper M(t, u0) every equation-free
operation is built on.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Tuple

import numpy as np

from eqfree.errors import BlowUpError

logger = logging.getLogger(__name__)

DEFAULT_DT = 1e-2


@dataclass(frozen=True)
class MicroSystem:
    """
    A first-order system du/dt = rhs(u, params) of fixed dimension.

    Second-order models are stored as u = (positions, velocities).
    """

    rhs: Callable[[np.ndarray, Any], np.ndarray]
    dim: int
    params: Any = None

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.rhs(u, self.params)


def split_duration(t: float, dt: float) -> Tuple[int, float]:
    """
    Split a duration into a number of full steps and a shortened last step.

    The remainder is never negative. Remainders within rounding of zero or
    of a full step are absorbed.
    """
    ratio = t / dt
    n_full = int(np.floor(ratio + 1e-9 * max(1.0, ratio)))
    remainder = max(t - n_full * dt, 0.0)
    if remainder <= 1e-12 * max(1.0, t):
        remainder = 0.0
    elif remainder >= dt * (1.0 - 1e-9):
        n_full += 1
        remainder = 0.0
    return n_full, remainder


def rk4_step(system: MicroSystem, u: np.ndarray, h: float) -> np.ndarray:
    """
    One classical fourth order Runge-Kutta step.
    """
    k1 = system(u)
    k2 = system(u + 0.5 * h * k1)
    k3 = system(u + 0.5 * h * k2)
    k4 = system(u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_input(system: MicroSystem, u0, t: float, dt: float) -> np.ndarray:
    if t < 0:
        raise ValueError(f"integration time must be non-negative, got {t}")
    if dt <= 0:
        raise ValueError(f"step size must be positive, got {dt}")
    u = np.array(u0, dtype=float)
    if u.shape != (system.dim,):
        raise ValueError(f"state has shape {u.shape}, system dimension is {system.dim}")
    return u


def integrate(system: MicroSystem, u0, t: float, dt: float = DEFAULT_DT) -> np.ndarray:
    """
    Return M(t, u0), the state after time t.

    The last step is shortened so that the elapsed time is exactly t.
    """
    u = _check_input(system, u0, t, dt)
    n_full, remainder = split_duration(t, dt)

    for k in range(n_full):
        u = rk4_step(system, u, dt)
        if not np.isfinite(u).all():
            raise BlowUpError((k + 1) * dt)
    if remainder > 0:
        u = rk4_step(system, u, remainder)
        if not np.isfinite(u).all():
            raise BlowUpError(t)
    return u


def trajectory(
    system: MicroSystem, u0, t: float, dt: float = DEFAULT_DT, every: int = 1
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integrate like `integrate` and sample the state every `every` steps.

    Returns the sample times and the states, one row per sample. The
    initial and the final state are always included.
    """
    u = _check_input(system, u0, t, dt)
    if every < 1:
        raise ValueError("sampling stride must be at least 1")
    n_full, remainder = split_duration(t, dt)

    times = [0.0]
    states = [u.copy()]
    for k in range(n_full):
        u = rk4_step(system, u, dt)
        if not np.isfinite(u).all():
            raise BlowUpError((k + 1) * dt)
        if (k + 1) % every == 0:
            times.append((k + 1) * dt)
            states.append(u.copy())
    if remainder > 0:
        u = rk4_step(system, u, remainder)
        if not np.isfinite(u).all():
            raise BlowUpError(t)
    if times[-1] != t and (remainder > 0 or n_full % every):
        times.append(t)
        states.append(u.copy())
    return np.asarray(times), np.vstack(states)
