"""
Two counterflowing crowds in a corridor with a door.

Pedestrians follow a social force model: relaxation towards a desired
velocity, exponential repulsion between pedestrians plus a body force on
contact, and the same terms for the corridor sides and the door jambs. The
corridor is periodic along its axis; the door wall sits at x = 0 with a gap
of width w around y = 0. Blue pedestrians walk towards +x, red ones towards
-x. Once a pedestrian has passed the door it stops interacting with the
other crowd, walks on and rejoins the back of its own crowd.

Each pedestrian also carries an impatience in [0, 1]. It relaxes towards
the occupancy of the door by the other crowd while the pedestrian still
waits in front of it, and towards 0 otherwise. Patient pedestrians give way
to the other crowd by backing off to the clearance distance; impatient
ones push on, with a desired speed raised by up to `nervous_factor`.

The coarse variable is (m, mdot), where m is the mean over both crowds of
the door-weighted mean longitudinal position.
"""

import csv
import logging
import threading
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.optimize import newton as secant
from scipy.special import expit

from eqfree.errors import (
    ConfigError,
    DegenerateConfigurationError,
    LiftingDomainError,
    ModelDomainError,
)
from eqfree.internals.microsim import MicroSystem, trajectory
from eqfree.internals.operators import EqFreeConfig, Model

logger = logging.getLogger(__name__)

BLUE = 0
RED = 1
CROWD_NAMES = ("blue", "red")

# Pedestrians per unit corridor length in the default density.
DEFAULT_LINE_DENSITY = 8.0
LIFT_TOLERANCE = 1e-6

# Widths of the smoothed steps at the door edges, the patience threshold
# and the give-way speed profile.
EDGE_SOFTNESS = 0.05
PATIENCE_SOFTNESS = 0.05
GIVE_WAY_SOFTNESS = 0.5
# Door presence at which the occupancy reaches 1 - 1/e.
OCCUPANCY_SCALE = 0.25

# The density fit starts off-centre so that one crowd enters first.
FIT_START = 0.2
FIT_QUANTILE = 0.95


# pylint: disable=invalid-name,too-many-instance-attributes
@dataclass(frozen=True)
class PedParams:
    """
    Corridor geometry, crowd sizes and social force constants.

    Lengths are in corridor units, times in the units of `relax_time`.
    """

    N_per_crowd: int = 100
    w: float = 0.7
    r_v0: float = 1.0
    v0: float = 1.34
    length: float = 30.0
    height: float = 5.0
    wall_thickness: float = 0.2
    radius: float = 0.2
    repulsion: float = 25.0
    repulsion_range: float = 0.08
    wall_repulsion: float = 25.0
    body_stiffness: float = 1500.0
    relax_time: float = 0.5
    kappa_width: float = 2.0
    aim: float = 1.0
    steer_range: float = 2.0
    pass_range: float = 0.3
    clearance: float = 1.0
    memory_time: float = 4.0
    patience: float = 0.5
    nervous_factor: float = 2.0
    jitter: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.N_per_crowd < 1:
            raise ConfigError("N_per_crowd must be at least 1")
        for name in (
            "w", "r_v0", "v0", "length", "height", "wall_thickness", "radius", "repulsion",
            "repulsion_range", "wall_repulsion", "relax_time", "kappa_width", "aim",
            "steer_range", "pass_range", "memory_time",
        ):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if self.w >= self.height:
            raise ConfigError("door width must be smaller than the corridor height")
        if self.clearance < 0 or self.jitter < 0 or self.body_stiffness < 0:
            raise ConfigError("clearance, jitter and body_stiffness must be non-negative")
        if not 0 < self.patience < 1:
            raise ConfigError(f"patience must lie in (0, 1), got {self.patience!r}")
        if self.nervous_factor < 1:
            raise ConfigError(f"nervous_factor must be at least 1, got {self.nervous_factor!r}")

    @property
    def crowd_size(self) -> int:
        """
        Number of pedestrians in both crowds together.
        """
        return 2 * self.N_per_crowd


def crowd_labels(params: PedParams) -> np.ndarray:
    """
    BLUE for the first N_per_crowd pedestrians, RED for the rest.
    """
    return np.repeat([BLUE, RED], params.N_per_crowd)


def walking_directions(params: PedParams) -> np.ndarray:
    """
    +1 for blue pedestrians, -1 for red ones.
    """
    return np.where(crowd_labels(params) == BLUE, 1.0, -1.0)


def walking_speeds(params: PedParams) -> np.ndarray:
    """
    Desired speeds of calm pedestrians; red ones walk r_v0 times as fast.
    """
    return np.where(crowd_labels(params) == BLUE, params.v0, params.r_v0 * params.v0)


def wrap(x, length: float):
    """
    Minimum image of x in a periodic corridor of the given length.
    """
    return x - length * np.round(x / length)


@dataclass
class CrowdState:
    """
    Positions, velocities and impatience of all pedestrians, blue crowd
    first.

    As a microscopic state vector the layout is (x, y, vx, vy, impatience).
    """

    positions: np.ndarray
    velocities: np.ndarray
    impatience: np.ndarray
    crowd: np.ndarray

    @classmethod
    def from_vector(cls, u: np.ndarray, params: PedParams) -> "CrowdState":
        """
        Split a microscopic state vector.
        """
        x, y, vx, vy, impatience = _unpack(u, params)
        return cls(
            np.column_stack((x, y)), np.column_stack((vx, vy)), impatience.copy(),
            crowd_labels(params),
        )

    def vector(self) -> np.ndarray:
        """
        The microscopic state vector.
        """
        return np.concatenate(
            (
                self.positions[:, 0],
                self.positions[:, 1],
                self.velocities[:, 0],
                self.velocities[:, 1],
                self.impatience,
            )
        )


def _unpack(u: np.ndarray, params: PedParams):
    n = params.crowd_size
    return (
        wrap(u[:n], params.length),
        u[n : 2 * n],
        u[2 * n : 3 * n],
        u[3 * n : 4 * n],
        u[4 * n :],
    )


def desired_direction(x, y, params: PedParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unit vectors towards the door and then along the axis.

    Within about `steer_range` of the door pedestrians steer into the band
    of lateral positions that fit through the gap.
    """
    direction = walking_directions(params)
    band = max(params.w / 2 - params.radius, 0.0)
    dx = direction * (params.aim + np.abs(x))
    dy = (np.clip(y, -band, band) - y) * np.exp(-((x / params.steer_range) ** 2))
    norm = np.hypot(dx, dy)
    return dx / norm, dy / norm


def door_occupancy(x, y, params: PedParams) -> np.ndarray:
    """
    How much each crowd occupies the door, between 0 and 1, blue first.
    """
    presence = np.exp(-((x / params.radius) ** 2)) * expit(
        (params.w / 2 - np.abs(y)) / EDGE_SOFTNESS
    )
    labels = crowd_labels(params)
    load = np.array([np.sum(presence[labels == c]) for c in (BLUE, RED)])
    return 1.0 - np.exp(-load / OCCUPANCY_SCALE)


def waiting_pressure(x, y, params: PedParams) -> np.ndarray:
    """
    Occupancy of the door by the other crowd, for pedestrians that have not
    yet passed it, and 0 for those that have.
    """
    labels = crowd_labels(params)
    other = door_occupancy(x, y, params)[1 - labels]
    approach = -walking_directions(params) * x
    return other * expit((approach + params.wall_thickness / 2) / EDGE_SOFTNESS)


def desired_velocity(x, y, impatience, params: PedParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Desired velocities along `desired_direction`.

    Patient pedestrians give way while the other crowd occupies the door:
    their desired velocity turns around inside the clearance distance.
    """
    ex, ey = desired_direction(x, y, params)
    nervous = np.clip(impatience, 0.0, 1.0)
    courtesy = expit((params.patience - nervous) / PATIENCE_SOFTNESS)
    give_way = waiting_pressure(x, y, params) * courtesy
    approach = -walking_directions(params) * x
    factor = 1.0 - give_way + give_way * np.tanh(
        (approach - params.clearance) / GIVE_WAY_SOFTNESS
    )
    speed = walking_speeds(params) * (1.0 + (params.nervous_factor - 1.0) * nervous) * factor
    return speed * ex, speed * ey


def passage_weights(x, params: PedParams) -> np.ndarray:
    """
    1 before the door, decaying with the distance walked past it.
    """
    passed = np.maximum(walking_directions(params) * x, 0.0)
    return np.exp(-((passed / params.pass_range) ** 2))


def pedestrian_forces(x, y, params: PedParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pairwise repulsion A exp((2r - d) / B) + k max(2r - d, 0) along the line
    of centres.

    Pairs from different crowds are weighted by the passage weights of both.
    """
    rx = wrap(x[:, None] - x[None, :], params.length)
    ry = y[:, None] - y[None, :]
    dist = np.hypot(rx, ry)
    np.fill_diagonal(dist, np.inf)
    dist = np.maximum(dist, 1e-9)

    labels = crowd_labels(params)
    g = passage_weights(x, params)
    weight = np.where(labels[:, None] == labels[None, :], 1.0, g[:, None] * g[None, :])
    overlap = 2 * params.radius - dist
    magnitude = weight * (
        params.repulsion * np.exp(overlap / params.repulsion_range)
        + params.body_stiffness * np.maximum(overlap, 0.0)
    )
    return np.sum(magnitude * rx / dist, axis=1), np.sum(magnitude * ry / dist, axis=1)


def _wall_term(distance, params: PedParams):
    overlap = params.radius - distance
    return params.wall_repulsion * np.exp(
        overlap / params.repulsion_range
    ) + params.body_stiffness * np.maximum(overlap, 0.0)


def wall_forces(x, y, params: PedParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Repulsion from the corridor sides and from the closest point of each
    door jamb.
    """
    half_h = params.height / 2
    fx = np.zeros_like(x)
    fy = _wall_term(y + half_h, params) - _wall_term(half_h - y, params)

    half_t = params.wall_thickness / 2
    qx = np.clip(x, -half_t, half_t)
    for side in (1.0, -1.0):
        qy = side * np.clip(side * y, params.w / 2, half_h)
        dx, dy = x - qx, y - qy
        dist = np.hypot(dx, dy)
        inside = dist < 1e-12
        safe = np.where(inside, 1.0, dist)
        nx = np.where(inside, 0.0, dx / safe)
        ny = np.where(inside, -side, dy / safe)
        magnitude = _wall_term(dist, params)
        fx += magnitude * nx
        fy += magnitude * ny
    return fx, fy


def sf_rhs(u: np.ndarray, params: PedParams) -> np.ndarray:
    """
    Time derivative of the state vector (x, y, vx, vy, impatience).
    """
    x, y, vx, vy, impatience = _unpack(u, params)
    wx, wy = desired_velocity(x, y, impatience, params)
    px, py = pedestrian_forces(x, y, params)
    bx, by = wall_forces(x, y, params)
    ax = (wx - vx) / params.relax_time + px + bx
    ay = (wy - vy) / params.relax_time + py + by
    dp = (waiting_pressure(x, y, params) - impatience) / params.memory_time
    return np.concatenate((vx, vy, ax, ay, dp))


def _crowd_mean(x, vx, params: PedParams, what: str) -> Tuple[float, float]:
    lam2 = params.kappa_width**2
    kappa = np.exp(-(x**2) / (2 * lam2))
    total = np.sum(kappa)
    if total < 1e-12:
        raise DegenerateConfigurationError(f"{what} crowd has no weight near the door")
    weighted = np.sum(kappa * x)
    dkappa = -x / lam2 * kappa
    rate = (np.sum((dkappa * x + kappa) * vx) * total - weighted * np.sum(dkappa * vx)) / total**2
    return weighted / total, rate


def restrict_m(u: np.ndarray, params: PedParams) -> np.ndarray:
    """
    (m, mdot) with m = (m_red + m_blue) / 2 and m_c the kappa-weighted mean
    longitudinal position of crowd c, kappa(x) = exp(-x^2 / (2 lambda^2)).

    mdot is the exact time derivative of m along the current velocities.
    """
    x, _y, vx, _vy, _impatience = _unpack(u, params)
    labels = crowd_labels(params)
    means = [
        _crowd_mean(x[labels == c], vx[labels == c], params, CROWD_NAMES[c]) for c in (BLUE, RED)
    ]
    return 0.5 * np.array([means[0][0] + means[1][0], means[0][1] + means[1][1]])


def front_distance(params: PedParams) -> float:
    """
    Distance from the door plane to the front of a lifted crowd.
    """
    return params.wall_thickness / 2 + params.radius + params.clearance


@dataclass(frozen=True)
class DensityLine:
    """
    Linear density a d + b of a crowd, d the distance to the door, starting
    at `start`.
    """

    a: float
    b: float
    start: float

    def cumulative(self, d):
        """
        Pedestrians between start and d.
        """
        return 0.5 * self.a * (d**2 - self.start**2) + self.b * (d - self.start)

    def quantile(self, q):
        """
        Inverse of `cumulative`.
        """
        q = np.asarray(q, dtype=float)
        if abs(self.a) < 1e-12:
            return self.start + q / self.b
        c = q + 0.5 * self.a * self.start**2 + self.b * self.start
        disc = self.b**2 + 2 * self.a * c
        if np.any(disc < 0):
            raise ModelDomainError("density line cannot hold the crowd")
        return (-self.b + np.sqrt(disc)) / self.a

    def extent(self, n: int) -> float:
        """
        Far end of a span holding n pedestrians.
        """
        end = float(self.quantile(n))
        if self.a * self.start + self.b <= 0 or self.a * end + self.b < 0:
            raise ModelDomainError(f"density {self.a:.3g} d + {self.b:.3g} is negative on its span")
        return end


def default_density(params: PedParams) -> DensityLine:
    """
    Uniform density starting just behind the clearance in front of the door.
    """
    return DensityLine(a=0.0, b=DEFAULT_LINE_DENSITY, start=front_distance(params))


def _lanes(params: PedParams) -> np.ndarray:
    margin = params.radius + 0.1
    usable = params.height - 2 * margin
    count = max(1, int(usable // (3 * params.radius)))
    if count == 1:
        return np.zeros(1)
    return np.linspace(-usable / 2, usable / 2, count)


Densities = Union[DensityLine, Tuple[DensityLine, DensityLine]]


def check_at_rest(x_macro) -> np.ndarray:
    """
    The coarse state as an array, if it lies on the mdot = 0 slice.
    """
    x_macro = np.atleast_1d(np.asarray(x_macro, dtype=float))
    if abs(x_macro[1]) > 1e-9:
        raise LiftingDomainError("lifting covers only states with mdot = 0")
    return x_macro


def lift_linear(x_macro, density: Densities, params: PedParams) -> np.ndarray:
    """
    Place both crowds at rest and patient by stratified quantiles of their
    densities, then shift them together along the axis until m hits the
    target.
    """
    x_macro = check_at_rest(x_macro)
    blue, red = (density, density) if isinstance(density, DensityLine) else density

    rng = np.random.default_rng(params.seed)
    jx = rng.uniform(-params.jitter, params.jitter, params.N_per_crowd)
    jy = rng.uniform(-params.jitter, params.jitter, params.N_per_crowd)

    def layout(line):
        line.extent(params.N_per_crowd)
        distance = line.quantile(np.arange(params.N_per_crowd) + 0.5) + jx
        lanes = _lanes(params)
        return distance, lanes[np.arange(params.N_per_crowd) % len(lanes)] + jy

    d_blue, y_blue = layout(blue)
    d_red, y_red = layout(red)
    base_x = np.concatenate((-d_blue, d_red))
    y = np.concatenate((y_blue, y_red))
    zeros = np.zeros(params.crowd_size)

    def state(shift):
        return np.concatenate((base_x + shift, y, zeros, zeros, zeros))

    def mismatch(shift):
        return restrict_m(state(shift), params)[0] - x_macro[0]

    shift = 0.0
    if abs(mismatch(0.0)) > 1e-12:
        try:
            shift = float(secant(mismatch, 0.0, x1=x_macro[0] or 0.1, tol=1e-12, maxiter=50))
        except RuntimeError as e:
            raise LiftingDomainError(f"m={x_macro[0]:.6g} cannot be reached: {e}") from e
    if abs(mismatch(shift)) > LIFT_TOLERANCE:
        raise LiftingDomainError(f"m={x_macro[0]:.6g} cannot be reached by shifting the crowds")

    x = base_x + shift
    direction = walking_directions(params)
    half_t = params.wall_thickness / 2
    through = np.flatnonzero((direction * x > -half_t) | (np.abs(x) >= params.length / 2))
    if len(through):
        raise LiftingDomainError(
            f"shift {shift:.4g} pushes a pedestrian through the door plane", int(through[0])
        )
    return state(shift)


def _holding_line(a: float, b: float, start: float, end: float, n: int, what: str) -> DensityLine:
    mass = 0.5 * a * (end**2 - start**2) + b * (end - start)
    if a * start + b <= 0 or a * end + b <= 0 or mass <= 0:
        logger.warning(
            "%s density fit %.4g d + %.4g is not positive on [%.3g, %.3g]; using a uniform line",
            what, a, b, start, end,
        )
        return DensityLine(a=0.0, b=n / (end - start), start=start)
    scale = n / mass
    return DensityLine(a=a * scale, b=b * scale, start=start)


# pylint: disable=too-many-arguments,too-many-locals
def fit_density(
    ops,
    cfg: EqFreeConfig,
    params: PedParams,
    duration: float = 500.0,
    bins: int = 20,
    every: int = 50,
) -> Tuple[Tuple[DensityLine, DensityLine], float]:
    """
    Fit a linear density to each crowd on the approach side of the door.

    The simulation starts from the lifted state m = FIT_START, heals for
    cfg.t_skip and is then sampled for the given duration. Positions between
    the lifted front and the 95% quantile of the waiting crowd are binned
    into a histogram per crowd and fitted by least squares. Each line is
    rescaled to hold the whole crowd on that span. Returns the lines and the
    larger relative L1 error between histogram and fit.
    """
    heal = cfg.t_skip
    times, states = trajectory(
        ops.system, ops.lift([FIT_START, 0.0]), heal + duration, cfg.dt, every
    )
    states = states[times >= heal - 1e-9]
    start = front_distance(params)
    labels = crowd_labels(params)
    direction = walking_directions(params)
    x_all = wrap(states[:, : params.crowd_size], params.length)

    lines, errors = [], []
    for crowd in (BLUE, RED):
        name = CROWD_NAMES[crowd]
        distance = (-direction[labels == crowd] * x_all[:, labels == crowd]).ravel()
        ahead = distance[distance >= start]
        if len(ahead) < bins:
            raise ModelDomainError(f"{name} crowd never waits behind the clearance")
        end = min(float(np.quantile(ahead, FIT_QUANTILE)), params.length / 2)
        if end <= start + 1e-9:
            raise ModelDomainError(f"{name} crowd occupies no span behind the clearance")
        edges = np.linspace(start, end, bins + 1)
        centres = 0.5 * (edges[:-1] + edges[1:])
        counts, _ = np.histogram(ahead, bins=edges)
        profile = counts / (len(states) * (edges[1] - edges[0]))
        a, b = np.polyfit(centres, profile, 1)
        fitted = a * centres + b
        errors.append(float(np.sum(np.abs(profile - fitted)) / max(np.sum(profile), 1e-300)))
        lines.append(_holding_line(float(a), float(b), start, end, params.N_per_crowd, name))
        logger.info("%s density fit %.4g d + %.4g (L1 %.3f)", name, a, b, errors[-1])
    return (lines[0], lines[1]), max(errors)


SNAPSHOT_COLUMNS = ("crowd", "id", "x", "y", "vx", "vy", "impatience")


def dump_snapshot(path, u: np.ndarray, params: PedParams, time: Optional[float] = None):
    """
    Write rows (crowd, id, x, y, vx, vy, impatience) after a parameter header.
    """
    state = CrowdState.from_vector(u, params)
    with open(path, "w", encoding="utf-8", newline="") as fobj:
        fobj.write(f"# pedestrian snapshot {params!r}\n")
        if time is not None:
            fobj.write(f"# t = {time!r}\n")
        writer = csv.writer(fobj)
        writer.writerow(SNAPSHOT_COLUMNS)
        for i, (pos, vel, nervous) in enumerate(
            zip(state.positions, state.velocities, state.impatience)
        ):
            writer.writerow(
                (CROWD_NAMES[state.crowd[i]], i, *(f"{v:.12g}" for v in (*pos, *vel, nervous)))
            )


def load_snapshot(path, params: PedParams) -> np.ndarray:
    """
    Read a snapshot written by `dump_snapshot` back into a state vector.
    """
    with open(path, "r", encoding="utf-8", newline="") as fobj:
        rows = [row for row in csv.reader(line for line in fobj if not line.startswith("#"))]
    if not rows or tuple(rows[0]) != SNAPSHOT_COLUMNS:
        raise ConfigError(f"snapshot header must be {','.join(SNAPSHOT_COLUMNS)}")
    table = np.array([[float(v) for v in row[2:]] for row in rows[1:]])
    if len(table) != params.crowd_size:
        raise ConfigError(f"snapshot has {len(table)} pedestrians, expected {params.crowd_size}")
    return np.concatenate(table.T)


def mirror(u: np.ndarray, params: PedParams) -> np.ndarray:
    """
    Reflect x -> -x and swap the crowds.
    """
    n = params.N_per_crowd
    x, y, vx, vy, impatience = _unpack(u, params)

    def swap(v):
        return np.concatenate((v[n:], v[:n]))

    return np.concatenate((swap(-x), swap(y), swap(-vx), swap(vy), swap(impatience)))


class PedestrianModel(Model):
    """
    Counterflow through a door with (m, mdot) restriction and linear-density
    lifting.

    Without fixed densities the lifting densities are fitted once per
    parameter point, with w and r_v0 snapped to a grid of spacing
    `refit_step`, and reused for all parameters on the same grid point.
    """

    name = "pedestrian"
    macro_dim = 2
    parameters = PedParams

    def __init__(
        self,
        density: Optional[Densities] = None,
        refit_step: float = 0.2,
        fit_duration: float = 500.0,
    ):
        if refit_step <= 0 or fit_duration <= 0:
            raise ConfigError("refit_step and fit_duration must be positive")
        self._density = density
        self.refit_step = refit_step
        self.fit_duration = fit_duration
        self._fitted: Dict[PedParams, Tuple[DensityLine, DensityLine]] = {}
        self._lock = threading.Lock()

    def fit_point(self, params: PedParams) -> PedParams:
        """
        The parameter point whose density fit serves params.
        """

        def snap(value):
            return max(self.refit_step, round(round(value / self.refit_step) * self.refit_step, 12))

        return replace(params, w=snap(params.w), r_v0=snap(params.r_v0))

    def density(self, params: PedParams) -> Densities:
        """
        Densities used for lifting.
        """
        if self._density is not None:
            return self._density
        point = self.fit_point(params)
        with self._lock:
            if point not in self._fitted:
                ops = PedestrianModel(default_density(point)).operators(point)
                logger.info("fitting lifting densities at w=%g r_v0=%g", point.w, point.r_v0)
                self._fitted[point], _error = fit_density(
                    ops, self.default_eqfree(), point, duration=self.fit_duration
                )
            return self._fitted[point]

    def system(self, params: PedParams) -> MicroSystem:
        return MicroSystem(sf_rhs, 5 * params.crowd_size, params)

    def lift(self, x, params: PedParams) -> np.ndarray:
        return lift_linear(check_at_rest(x), self.density(params), params)

    def restrict(self, u, params: PedParams) -> np.ndarray:
        return restrict_m(u, params)

    def default_eqfree(self) -> EqFreeConfig:
        return EqFreeConfig(t_skip=20.0, t0=20.0, dt=0.02)
