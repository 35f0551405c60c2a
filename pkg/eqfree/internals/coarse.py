"""
Macroscopic time steppers and coarse analysis built from lift, evolve and
restrict.

All operations are pure given the operator pair and the settings. Newton
iterations are sequential; the columns of every finite-difference Jacobian
are independent and may be evaluated concurrently.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from eqfree.errors import NewtonDivergence
from eqfree.internals.microsim import trajectory
from eqfree.internals.newton import check_conditioning, evaluate_all, newton
from eqfree.internals.operators import EqFreeConfig, OperatorPair, as_macro

logger = logging.getLogger(__name__)


class BurstCache:
    """
    Restrictions of the lifted state after a fixed set of durations.

    Results are memoized per macroscopic point so that Newton solvers can
    reuse the bursts of their last iterate.
    """

    def __init__(self, ops: OperatorPair, cfg: EqFreeConfig, durations: Sequence[float]):
        if list(durations) != sorted(durations) or durations[0] < 0:
            raise ValueError("burst durations must be non-negative and ascending")
        self.ops = ops
        self.cfg = cfg
        self.durations = tuple(float(t) for t in durations)
        self._cache: Dict[bytes, np.ndarray] = {}

    def __call__(self, x) -> np.ndarray:
        x = as_macro(x, self.ops.macro_dim)
        key = x.tobytes()
        if key not in self._cache:
            u = self.ops.lift(x)
            elapsed = 0.0
            rows = []
            for t in self.durations:
                u = self.ops.evolve(u, t - elapsed, self.cfg.dt)
                elapsed = t
                rows.append(np.atleast_1d(self.ops.restrict(u)))
            self._cache[key] = np.vstack(rows)
        return self._cache[key]


def restrict_after(ops: OperatorPair, cfg: EqFreeConfig, x, t: float) -> np.ndarray:
    """
    R M(t, L x).
    """
    return BurstCache(ops, cfg, (t,))(x)[0]


def phi_explicit(ops: OperatorPair, cfg: EqFreeConfig, t: float, x) -> np.ndarray:
    """
    Explicit macroscopic time stepper R M(t, L x).
    """
    return restrict_after(ops, cfg, x, t)


def _newton(cfg: EqFreeConfig, residual, y0, **kwargs):
    return newton(
        residual,
        y0,
        steps=cfg.fd_steps,
        tol=cfg.newton_tol,
        max_iter=cfg.newton_max_iter,
        max_halvings=cfg.max_halvings,
        cond_max=cfg.cond_max,
        **kwargs,
    )


def phi_implicit(ops: OperatorPair, cfg: EqFreeConfig, t: float, x) -> np.ndarray:
    """
    Implicit macroscopic time stepper.

    Returns y with R M(t_skip, L y) = R M(t_skip + t, L x), found by Newton
    iteration started at y = x.
    """
    x = as_macro(x, ops.macro_dim)
    target = restrict_after(ops, cfg, x, cfg.t_skip + t)
    healed = BurstCache(ops, cfg, (cfg.t_skip,))

    def residual(y):
        return healed(y)[0] - target

    return _newton(cfg, residual, x).x


@dataclass
class Equilibrium:
    """
    A coarse equilibrium in solver (unhealed) and healed values.
    """

    x: np.ndarray
    healed: np.ndarray
    iterations: int
    residual: float


def fixed_point_bursts(ops: OperatorPair, cfg: EqFreeConfig) -> BurstCache:
    """
    Bursts giving (R M(t_skip, L x), R M(t_skip + t0, L x)).
    """
    return BurstCache(ops, cfg, (cfg.t_skip, cfg.t_skip + cfg.t0))


def equilibrium_residual(bursts: BurstCache, x) -> np.ndarray:
    """
    R M(t_skip + t0, L x) - R M(t_skip, L x).
    """
    healed, evolved = bursts(x)
    return evolved - healed


def find_equilibrium(ops: OperatorPair, cfg: EqFreeConfig, x_guess) -> Equilibrium:
    """
    Solve R M(t_skip + t0, L x) = R M(t_skip, L x) for a coarse equilibrium x.

    Both the solver unknown and its healed value R M(t_skip, L x) are
    returned; branches are reported in healed values.
    """
    x_guess = as_macro(x_guess, ops.macro_dim)
    bursts = fixed_point_bursts(ops, cfg)
    result = _newton(cfg, lambda x: equilibrium_residual(bursts, x), x_guess)
    logger.debug(
        "equilibrium x=%s after %d iterations (residual %.3e)",
        result.x, result.iterations, result.residual,
    )
    return Equilibrium(
        x=result.x,
        healed=bursts(result.x)[0],
        iterations=result.iterations,
        residual=result.residual,
    )


def coarse_jacobians(
    ops: OperatorPair, cfg: EqFreeConfig, x, bursts: Optional[BurstCache] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Forward-difference Jacobians A of R M(t_skip + t0, L x) and B of
    R M(t_skip, L x).
    """
    x = as_macro(x, ops.macro_dim)
    if bursts is None:
        bursts = fixed_point_bursts(ops, cfg)
    steps = cfg.fd_steps(x)
    points = []
    for j, h in enumerate(steps):
        point = x.copy()
        point[j] += h
        points.append(point)
    base = bursts(x)
    columns = evaluate_all(bursts, points)
    a = np.empty((ops.macro_dim, ops.macro_dim))
    b = np.empty_like(a)
    for j, (column, h) in enumerate(zip(columns, steps)):
        b[:, j] = (column[0] - base[0]) / h
        a[:, j] = (column[1] - base[1]) / h
    return a, b


def generalized_eigenvalues(a: np.ndarray, b: np.ndarray, cond_max: float = 1e10) -> np.ndarray:
    """
    Eigenvalues of A v = lambda B v, largest modulus first.

    Computed as eig(B^-1 A); an ill-conditioned B is an error.
    """
    check_conditioning(b, "B", cond_max)
    eigenvalues = np.linalg.eigvals(np.linalg.solve(b, a))
    return eigenvalues[np.argsort(-np.abs(eigenvalues), kind="stable")]


def stability(ops: OperatorPair, cfg: EqFreeConfig, x_eq) -> np.ndarray:
    """
    Eigenvalues of the coarse equilibrium x_eq; |lambda| < 1 means stable.
    """
    a, b = coarse_jacobians(ops, cfg, x_eq)
    return generalized_eigenvalues(a, b, cfg.cond_max)


def classify(eigenvalues: np.ndarray, band: float) -> Optional[bool]:
    """
    True if stable, False if unstable, None if marginal within band.
    """
    if len(eigenvalues) == 0:
        return True
    radius = float(np.max(np.abs(eigenvalues)))
    if radius < 1.0 - band:
        return True
    if radius > 1.0 + band:
        return False
    return None


def coarse_rhs(ops: OperatorPair, cfg: EqFreeConfig, x) -> np.ndarray:
    """
    Burst estimate of the macroscopic right-hand side F(x).
    """
    healed, advanced = BurstCache(ops, cfg, (cfg.t_skip, cfg.t_skip + cfg.delta))(x)
    return (advanced - healed) / cfg.delta


def projective_integrate(
    ops: OperatorPair, cfg: EqFreeConfig, x0, dt_macro: float, n_steps: int
) -> np.ndarray:
    """
    Projective forward Euler steps of the macroscopic dynamics.

    Each step solves R M(t_skip, L x_{k+1}) - R M(t_skip, L x_k) = dt_macro F(x_k)
    for x_{k+1}. dt_macro may be negative. Returns the trajectory, one row
    per step including x0.
    """
    x = as_macro(x0, ops.macro_dim)
    steps = [x]
    healed = BurstCache(ops, cfg, (cfg.t_skip,))
    bursts = BurstCache(ops, cfg, (cfg.t_skip, cfg.t_skip + cfg.delta))

    for k in range(n_steps):
        if dt_macro == 0:
            steps.append(x.copy())
            continue
        base, advanced = bursts(x)
        target = base + dt_macro * (advanced - base) / cfg.delta
        guess = x if k == 0 else x + (x - steps[-2])
        try:
            x = _newton(cfg, lambda y, target=target: healed(y)[0] - target, guess).x
        except NewtonDivergence as e:
            raise NewtonDivergence(
                f"projective step {k + 1} failed",
                e.residual,
                e.iterations,
                trajectory=np.vstack(steps),
            ) from e
        steps.append(x)
    return np.vstack(steps)


def match_restriction(ops: OperatorPair, cfg: EqFreeConfig, x_target) -> np.ndarray:
    """
    A microscopic state u = M(t_skip, L y) with R(u) = x_target.

    The state lies on the slow manifold up to the healing error.
    """
    x_target = as_macro(x_target, ops.macro_dim)
    healed = BurstCache(ops, cfg, (cfg.t_skip,))
    y = _newton(cfg, lambda y: healed(y)[0] - x_target, x_target).x
    return ops.evolve(ops.lift(y), cfg.t_skip, cfg.dt)


@dataclass
class HealingProfile:
    """
    Distance between the restrictions of two trajectories.

    `times` and `distance` sample d(t) = |R M(t_skip + t, u0) - R M(t_skip + t, u1)|
    for t in [0, horizon]. `gamma` is the decay rate fitted over the healing
    window, `epsilon` the growth rate fitted over [t_skip, t_skip + horizon]
    and `offset` the intercept of that fit, log C - gamma t_skip.
    """

    times: np.ndarray
    distance: np.ndarray
    healing_times: np.ndarray
    healing_distance: np.ndarray
    epsilon: float
    gamma: float
    offset: float
    t_skip: float

    @property
    def log_c(self) -> float:
        """
        Estimated log of the prefactor C.
        """
        return self.offset + self.gamma * self.t_skip


def _log_linear_fit(times: np.ndarray, values: np.ndarray, floor: float) -> Tuple[float, float]:
    mask = values > floor
    if np.count_nonzero(mask) < 2:
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(times[mask], np.log(values[mask]), 1)
    return float(slope), float(intercept)


# pylint: disable=too-many-arguments,too-many-locals
def healing_diagnostic(
    ops: OperatorPair,
    cfg: EqFreeConfig,
    u0,
    u1,
    horizon: float,
    every: int = 1,
    floor: float = 1e-12,
) -> HealingProfile:
    """
    Sample how fast two microscopic states with matched healed restriction
    become indistinguishable, and fit the rates of the separation estimate
    |R M(t_skip + t, u0) - R M(t_skip + t, u1)| < C exp(epsilon t - gamma t_skip).
    """
    total = cfg.t_skip + horizon
    profiles = []
    for u in (u0, u1):
        times, states = trajectory(ops.system, u, total, cfg.dt, every)
        profiles.append(np.array([np.atleast_1d(ops.restrict(s)) for s in states]))
    separation = np.linalg.norm(profiles[0] - profiles[1], axis=1)

    scale = max(1.0, float(np.max(np.abs(profiles[0]))))
    early = times <= cfg.t_skip + 1e-12
    late = times >= cfg.t_skip - 1e-12
    decay, _ = _log_linear_fit(times[early], separation[early], floor * scale)
    epsilon, offset = _log_linear_fit(times[late] - cfg.t_skip, separation[late], floor * scale)
    return HealingProfile(
        times=times[late] - cfg.t_skip,
        distance=separation[late],
        healing_times=times[early],
        healing_distance=separation[early],
        epsilon=epsilon,
        gamma=-decay,
        offset=offset,
        t_skip=cfg.t_skip,
    )
