"""
The optimal velocity car-following model on a ring road.

N cars with positions x_n and velocities y_n obey
tau y_n' + y_n = V(x_{n+1} - x_n), V(d) = v0 (tanh(d - h) + tanh(h)),
with x_{n+N} = x_n + L. The coarse variable is the standard deviation of
the headways; lifting rescales the headway deviations of a stored jam
profile.
"""

import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from eqfree import config
from eqfree.constants import OV_CARS, OV_INFLECTION, OV_RING_LENGTH, OV_TAU
from eqfree.errors import ConfigError, LiftingDomainError, ModelDomainError
from eqfree.internals.microsim import MicroSystem, integrate
from eqfree.internals.operators import EqFreeConfig, Model

logger = logging.getLogger(__name__)

# Jam used to shape the lifting, stable and far from the fold.
REFERENCE_V0 = 0.95
REFERENCE_H = 1.2
REFERENCE_DURATION = 1000.0
REFERENCE_MAX_DURATION = 20000.0
REFERENCE_CHUNK = 100.0
REFERENCE_TOLERANCE = 1e-6
REFERENCE_PERTURBATION = 0.5
# Below this fraction of sigma_ref the lifted shape blends into the longest wave.
SHAPE_BLEND = 0.5


# pylint: disable=invalid-name
@dataclass(frozen=True)
class OVParams:
    """
    Parameters of the ring road.

    `mu` scales the lifted headway deviations; mu = 1 lifts consistently.
    """

    tau: float = OV_TAU
    v0: float = 0.95
    h: float = OV_INFLECTION
    N: int = OV_CARS
    L: float = OV_RING_LENGTH
    mu: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau!r}")
        if self.N < 2:
            raise ConfigError(f"N must be at least 2, got {self.N!r}")
        if not self.L > 0:
            raise ConfigError(f"L must be positive, got {self.L!r}")
        if not np.isfinite([self.v0, self.h, self.mu]).all():
            raise ConfigError("v0, h and mu must be finite")

    @property
    def spacing(self) -> float:
        """
        Mean headway L/N.
        """
        return self.L / self.N


def optimal_velocity(headway, params: OVParams):
    """
    V(d) = v0 (tanh(d - h) + tanh(h)).
    """
    return params.v0 * (np.tanh(headway - params.h) + np.tanh(params.h))


def optimal_velocity_slope(headway, params: OVParams):
    """
    V'(d) = v0 sech^2(d - h).
    """
    return params.v0 / np.cosh(headway - params.h) ** 2


def headways(u: np.ndarray, params: OVParams) -> np.ndarray:
    """
    x_{n+1} - x_n with the last car following the first one around the ring.
    """
    x = u[: params.N]
    gaps = np.roll(x, -1) - x
    gaps[-1] += params.L
    return gaps


def ov_rhs(u: np.ndarray, params: OVParams) -> np.ndarray:
    """
    Time derivative of u = (positions, velocities).
    """
    velocities = u[params.N :]
    accelerations = (optimal_velocity(headways(u, params), params) - velocities) / params.tau
    return np.concatenate((velocities, accelerations))


def restrict_sigma(u: np.ndarray, params: OVParams) -> np.ndarray:
    """
    Standard deviation of the headways, normalized by N - 1.
    """
    return np.array([np.std(headways(u, params), ddof=1)])


def uniform_flow_state(params: OVParams) -> np.ndarray:
    """
    Equally spaced cars driving at the optimal velocity of their headway.
    """
    positions = params.spacing * np.arange(params.N)
    velocities = np.full(params.N, optimal_velocity(params.spacing, params))
    return np.concatenate((positions, velocities))


def state_from_headways(gaps: np.ndarray, params: OVParams) -> np.ndarray:
    """
    Positions anchored at x_1 = 0 with velocities V(headway) per car.
    """
    positions = np.concatenate(([0.0], np.cumsum(gaps[:-1])))
    return np.concatenate((positions, optimal_velocity(gaps, params)))


@dataclass
class ReferenceProfile:
    """
    A stored microscopic jam used as the shape of the lifting.
    """

    headways: np.ndarray
    velocities: np.ndarray
    sigma_ref: float = field(init=False)

    def __post_init__(self):
        self.headways = np.asarray(self.headways, dtype=float)
        self.velocities = np.asarray(self.velocities, dtype=float)
        if self.headways.shape != self.velocities.shape:
            raise ValueError("headways and velocities differ in length")
        self.sigma_ref = float(np.std(self.headways, ddof=1))
        if not self.sigma_ref > 0:
            raise ModelDomainError("a uniform reference profile cannot be rescaled")

    @property
    def fundamental(self) -> np.ndarray:
        """
        Longest-wave Fourier component of the headway deviations, scaled to
        unit standard deviation.
        """
        coefficients = np.fft.rfft(self.headways - np.mean(self.headways))
        coefficients[2:] = 0.0
        wave = np.fft.irfft(coefficients, n=self.cars)
        return wave / np.std(wave, ddof=1)

    def shape(self, sigma: float) -> np.ndarray:
        """
        Unit-deviation headway shape for a lifted spread sigma.

        At and above SHAPE_BLEND * sigma_ref this is the reference itself;
        towards sigma = 0 it blends linearly into the fundamental wave.
        """
        jam = (self.headways - np.mean(self.headways)) / self.sigma_ref
        weight = min(abs(sigma) / (SHAPE_BLEND * self.sigma_ref), 1.0)
        if weight == 1.0:
            return jam
        blended = weight * jam + (1.0 - weight) * self.fundamental
        return blended / np.std(blended, ddof=1)

    @property
    def cars(self) -> int:
        """
        Number of cars in the profile.
        """
        return len(self.headways)

    @property
    def ring_length(self) -> float:
        """
        Sum of the headways.
        """
        return float(np.sum(self.headways))

    @classmethod
    def from_state(cls, u: np.ndarray, params: OVParams) -> "ReferenceProfile":
        """
        Profile of a microscopic state.
        """
        return cls(headways(u, params), np.array(u[params.N :], dtype=float))

    def save(self, path, params: OVParams):
        """
        Write the profile as columns (index, headway, velocity).
        """
        header = (
            f"ov reference tau={params.tau!r} v0={REFERENCE_V0!r} h={REFERENCE_H!r} "
            f"N={params.N} L={params.L!r} seed={params.seed}\nindex headway velocity"
        )
        table = np.column_stack((np.arange(self.cars), self.headways, self.velocities))
        np.savetxt(path, table, fmt=("%d", "%.17g", "%.17g"), header=header)

    @classmethod
    def load(cls, path) -> "ReferenceProfile":
        """
        Read a profile written by `save`.
        """
        table = np.loadtxt(path, ndmin=2)
        return cls(table[:, 1], table[:, 2])


def lift_mu(sigma_target, ref: ReferenceProfile, params: OVParams) -> np.ndarray:
    """
    Microscopic state with headway deviations of the reference rescaled to
    mu * sigma_target.

    Headways are mu sigma s + <d_ref> with s = ref.shape(mu sigma), which is
    (d_ref - <d_ref>) / sigma_ref for spreads of at least half the
    reference's. Positions start at 0 and every car drives at the optimal
    velocity of its headway.
    """
    if ref.cars != params.N:
        raise ConfigError(f"reference profile has {ref.cars} cars, model has {params.N}")
    sigma = float(np.atleast_1d(sigma_target)[0])
    spread = params.mu * sigma
    gaps = spread * ref.shape(spread) + np.mean(ref.headways)
    bad = np.flatnonzero(gaps <= 0)
    if len(bad):
        raise LiftingDomainError(
            f"sigma={sigma:.6g} gives a non-positive headway {gaps[bad[0]]:.3g}", int(bad[0])
        )
    return state_from_headways(gaps, params)


def perturbed_uniform_flow(params: OVParams, amplitude: float, seed: int) -> np.ndarray:
    """
    Uniform flow with independent uniform position perturbations.
    """
    rng = np.random.default_rng(seed)
    u = uniform_flow_state(params)
    u[: params.N] += rng.uniform(-amplitude, amplitude, params.N)
    return u


def seeded_jam_state(params: OVParams, amplitude: float, seed: int) -> np.ndarray:
    """
    Uniform flow with one long-wave headway modulation and a small seeded
    ripple on top, velocities at V(headway).
    """
    rng = np.random.default_rng(seed)
    n = np.arange(params.N)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    gaps = 1.0 + amplitude * np.cos(2.0 * np.pi * n / params.N + phase)
    gaps += rng.uniform(-1e-3, 1e-3, params.N)
    gaps *= params.L / np.sum(gaps)
    return state_from_headways(gaps, params)


def generate_reference(
    params: OVParams,
    duration: float = REFERENCE_DURATION,
    max_duration: float = REFERENCE_MAX_DURATION,
) -> ReferenceProfile:
    """
    Simulate a single seeded jam until its headway spread saturates.

    After at least `duration` time units the simulation continues in chunks
    of REFERENCE_CHUNK until sigma moves by less than REFERENCE_TOLERANCE over
    one chunk, or until max_duration.
    """
    jam = replace(params, v0=REFERENCE_V0, h=REFERENCE_H, mu=1.0)
    system = MicroSystem(ov_rhs, 2 * jam.N, jam)
    logger.info(
        "generating OV reference (N=%d, L=%g, seed=%d) over at least %g time units",
        params.N, params.L, params.seed, duration,
    )
    u = integrate(system, seeded_jam_state(jam, REFERENCE_PERTURBATION, params.seed), duration)
    elapsed = duration
    sigma = float(restrict_sigma(u, jam)[0])
    while elapsed < max_duration:
        u = integrate(system, u, REFERENCE_CHUNK)
        elapsed += REFERENCE_CHUNK
        previous, sigma = sigma, float(restrict_sigma(u, jam)[0])
        if abs(sigma - previous) < REFERENCE_TOLERANCE:
            logger.info("OV reference saturated at sigma=%.6g after %g time units", sigma, elapsed)
            break
    else:
        logger.warning(
            "OV reference still drifting after %g time units (sigma=%.6g)", elapsed, sigma
        )
    return ReferenceProfile.from_state(u, jam)


def reference_path(params: OVParams) -> Path:
    """
    Cache location of the reference profile for these ring parameters.
    """
    name = f"ov-N{params.N}-L{params.L:g}-tau{params.tau:g}-seed{params.seed}.txt"
    return Path(config.REFERENCE_DIR) / name


def reference_profile(params: OVParams) -> ReferenceProfile:
    """
    Cached reference profile, generated on first use.
    """
    path = reference_path(params)
    if path.exists():
        return ReferenceProfile.load(path)
    ref = generate_reference(params)
    os.makedirs(path.parent, exist_ok=True)
    ref.save(path, params)
    logger.info("stored OV reference in %s", path)
    return ref


def _mode_angles(params: OVParams) -> np.ndarray:
    return 2.0 * np.pi * np.arange(1, params.N) / params.N


def uniform_flow_growth_rate(params: OVParams) -> float:
    """
    Largest real part of the spectrum linearized about uniform flow.

    Mode k grows like exp(lambda t) with
    tau lambda^2 + lambda = V'(L/N) (exp(i theta_k) - 1).
    """
    slope = optimal_velocity_slope(params.spacing, params)
    forcing = slope * (np.exp(1j * _mode_angles(params)) - 1.0)
    root = np.sqrt(1.0 + 4.0 * params.tau * forcing + 0j)
    lam = np.concatenate(((-1.0 + root) / (2 * params.tau), (-1.0 - root) / (2 * params.tau)))
    return float(np.max(lam.real))


def hopf_v0(params: OVParams, h: float) -> float:
    """
    Smallest v0 at which uniform flow loses linear stability.

    Mode theta crosses the imaginary axis at
    V'(L/N) = 1 / (tau (1 + cos theta)).
    """
    sech2 = 1.0 / np.cosh(params.spacing - h) ** 2
    return float(np.min(1.0 / (params.tau * sech2 * (1.0 + np.cos(_mode_angles(params))))))


def analytic_hopf_curve(params: OVParams, h_values: Sequence[float]) -> List[Tuple[float, float]]:
    """
    (h, v0*) along the linear-stability boundary of uniform flow.
    """
    return [(float(h), hopf_v0(params, h)) for h in h_values]


class TrafficModel(Model):
    """
    Ring road with sigma restriction and mu-scaled lifting.
    """

    name = "traffic"
    macro_dim = 1
    parameters = OVParams

    def __init__(self, reference: Optional[ReferenceProfile] = None):
        self._references = {}
        self._reference = reference

    def reference(self, params: OVParams) -> ReferenceProfile:
        """
        The reference profile used for lifting at params.
        """
        if self._reference is not None:
            return self._reference
        key = (params.N, params.L, params.tau, params.seed)
        if key not in self._references:
            self._references[key] = reference_profile(params)
        return self._references[key]

    def system(self, params: OVParams) -> MicroSystem:
        return MicroSystem(ov_rhs, 2 * params.N, params)

    def lift(self, x, params: OVParams) -> np.ndarray:
        return lift_mu(x, self.reference(params), params)

    def restrict(self, u, params: OVParams) -> np.ndarray:
        return restrict_sigma(u, params)

    def default_eqfree(self) -> EqFreeConfig:
        return EqFreeConfig(t_skip=100.0, t0=100.0)
