"""
Pseudo-arclength continuation of coarse equilibria, detection of folds and
stability changes along branches, and two-parameter continuation of fold
and Hopf points.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from eqfree.errors import EqFreeException, SingularJacobianError
from eqfree.internals.coarse import (
    BurstCache,
    classify,
    coarse_jacobians,
    equilibrium_residual,
    find_equilibrium,
    fixed_point_bursts,
    generalized_eigenvalues,
    stability,
)
from eqfree.internals.newton import evaluate_all, newton
from eqfree.internals.operators import EqFreeConfig, OperatorPair, ParameterFamily, as_macro

logger = logging.getLogger(__name__)

MAX_STEP_HALVINGS = 3


class EventKind(str, enum.Enum):
    """
    Kinds of events located along a branch.
    """

    FOLD = "fold"
    HOPF = "hopf"
    STABILITY = "stability"


# pylint: disable=too-many-instance-attributes
@dataclass
class BranchPoint:
    """
    One converged point of a branch of coarse equilibria.

    `stable` is None when the spectral radius lies within the marginal band.
    """

    param: float
    x_unhealed: np.ndarray
    x_healed: np.ndarray
    eigenvalues: np.ndarray
    stable: Optional[bool]
    newton_iters: int
    residual: float
    step: float = 0.0

    @property
    def spectral_radius(self) -> float:
        """
        Largest eigenvalue modulus, nan without eigenvalues.
        """
        if len(self.eigenvalues) == 0:
            return float("nan")
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def leading_imag(self) -> float:
        """
        Imaginary part of the eigenvalue of largest modulus.
        """
        if len(self.eigenvalues) == 0:
            return float("nan")
        return float(np.abs(np.imag(self.eigenvalues[0])))


@dataclass
class BranchEvent:
    """
    A fold or stability change located between branch points.

    The event lies between points `index - 1` and `index + 1` for folds and
    between `index` and `index + 1` otherwise.
    """

    kind: EventKind
    param: float
    x_unhealed: np.ndarray
    index: int
    arclength: float


@dataclass
class Branch:
    """
    Ordered branch of coarse equilibria in one parameter.
    """

    p_name: str
    s: float
    points: List[BranchPoint] = field(default_factory=list)
    events: List[BranchEvent] = field(default_factory=list)
    status: str = "complete"
    param_weight: float = 1.0

    def vector(self, index: int) -> np.ndarray:
        """
        Point `index` as a weighted (p, x) vector.
        """
        point = self.points[index]
        return np.concatenate(([self.param_weight * point.param], point.x_unhealed))

    def arclengths(self) -> np.ndarray:
        """
        Cumulative arclength of the points along the branch.
        """
        if not self.points:
            return np.zeros(0)
        vectors = np.vstack([self.vector(i) for i in range(len(self.points))])
        gaps = np.linalg.norm(np.diff(vectors, axis=0), axis=1)
        return np.concatenate(([0.0], np.cumsum(gaps)))

    @property
    def params(self) -> np.ndarray:
        """
        Parameter values of all points.
        """
        return np.array([point.param for point in self.points])


def branch_point(
    family: ParameterFamily,
    cfg: EqFreeConfig,
    values: Dict[str, float],
    x,
    iterations: int = 0,
    residual: Optional[float] = None,
    step: float = 0.0,
    p_name: Optional[str] = None,
) -> BranchPoint:
    """
    Healed value, eigenvalues and stability of the equilibrium x.
    """
    ops = family.at(**values)
    x = as_macro(x, ops.macro_dim)
    bursts = fixed_point_bursts(ops, cfg)
    if residual is None:
        residual = float(np.linalg.norm(equilibrium_residual(bursts, x)))
    try:
        a, b = coarse_jacobians(ops, cfg, x, bursts)
        eigenvalues = generalized_eigenvalues(a, b, cfg.cond_max)
        stable = classify(eigenvalues, cfg.stability_band)
    except SingularJacobianError as e:
        logger.warning("no eigenvalues at %s: %s", values, e)
        eigenvalues = np.zeros(0, dtype=complex)
        stable = None
    if p_name is not None:
        param = values[p_name]
    else:
        param = next(iter(values.values()), float("nan"))
    return BranchPoint(
        param=float(param),
        x_unhealed=x,
        x_healed=bursts(x)[0],
        eigenvalues=eigenvalues,
        stable=stable,
        newton_iters=iterations,
        residual=residual,
        step=step,
    )


class ExtendedSystem:
    """
    Equilibrium condition in several parameters plus extra scalar equations.

    Unknowns are z = (p_1, ..., p_k, x). Bursts are memoized per point.
    """

    def __init__(self, family: ParameterFamily, cfg: EqFreeConfig, p_names: Sequence[str]):
        self.family = family
        self.cfg = cfg
        self.p_names = tuple(p_names)
        self._bursts: Dict[Tuple[float, ...], BurstCache] = {}

    def split(self, z: np.ndarray) -> Tuple[Dict[str, float], np.ndarray]:
        """
        Parameter values and macroscopic state of z.
        """
        k = len(self.p_names)
        return dict(zip(self.p_names, (float(v) for v in z[:k]))), z[k:]

    def bursts(self, values: Dict[str, float]) -> BurstCache:
        """
        Memoized fixed-point bursts at the parameter values.
        """
        key = tuple(values[name] for name in self.p_names)
        if key not in self._bursts:
            self._bursts[key] = fixed_point_bursts(self.family.at(**values), self.cfg)
        return self._bursts[key]

    def equilibrium(self, z: np.ndarray) -> np.ndarray:
        """
        R M(t_skip + t0, L x; p) - R M(t_skip, L x; p).
        """
        values, x = self.split(z)
        return equilibrium_residual(self.bursts(values), x)

    def fold_test(self, z: np.ndarray) -> float:
        """
        det(B^-1 A - I), zero when an eigenvalue equals one.
        """
        values, x = self.split(z)
        ops = self.family.at(**values)
        a, b = coarse_jacobians(ops, self.cfg, x, self.bursts(values))
        ratio = np.linalg.solve(b, a)
        return float(np.linalg.det(ratio - np.eye(len(x))))

    def solve(self, residual, z0) -> Tuple[np.ndarray, int, float]:
        """
        Newton iteration on the extended unknowns.
        """
        result = newton(
            residual,
            z0,
            steps=self.cfg.fd_steps,
            tol=self.cfg.newton_tol,
            max_iter=self.cfg.newton_max_iter,
            max_halvings=self.cfg.max_halvings,
            cond_max=self.cfg.cond_max,
        )
        return result.x, result.iterations, result.residual


def _within(value, bounds) -> bool:
    if bounds is None:
        return True
    lo, hi = bounds
    return bool(np.all(lo <= value) and np.all(value <= hi))


# pylint: disable=too-many-arguments,too-many-locals,too-many-branches,too-many-statements
def continue_branch(
    family: ParameterFamily,
    cfg: EqFreeConfig,
    p_name: str,
    p_start: float,
    x_start,
    s: float,
    n_points: int,
    p_range: Optional[Tuple[float, float]] = None,
    x_range: Optional[Tuple[float, float]] = None,
) -> Branch:
    """
    Pseudo-arclength continuation of coarse equilibria in parameter p_name.

    The first point is the equilibrium near (p_start, x_start), the second is
    found at p_start + s with the parameter fixed. Every further point solves
    the equilibrium condition together with
    secant . ((p, x) - (p_prev, x_prev)) = step
    where secant is the unit vector through the last two points. A failed
    corrector is retried with the step halved up to three times.
    """
    weight = cfg.param_weight
    branch = Branch(p_name=p_name, s=s, param_weight=weight)
    system = ExtendedSystem(family, cfg, (p_name,))

    start = find_equilibrium(family.at(**{p_name: p_start}), cfg, x_start)
    branch.points.append(
        branch_point(family, cfg, {p_name: p_start}, start.x, start.iterations, start.residual)
    )
    logger.info("branch start %s=%.6g x=%s", p_name, p_start, start.x)

    step = abs(s)
    for _ in range(MAX_STEP_HALVINGS + 1):
        p_next = p_start + np.sign(s) * step
        try:
            second = find_equilibrium(family.at(**{p_name: p_next}), cfg, start.x)
            break
        except EqFreeException as e:
            logger.info("natural step to %s=%.6g failed: %s", p_name, p_next, e)
            step /= 2
    else:
        branch.status = "bootstrap failed after step halvings"
        return branch
    if not (_within(p_next, p_range) and _within(second.x, x_range)):
        branch.status = "left range"
        return branch
    branch.points.append(
        branch_point(
            family, cfg, {p_name: p_next}, second.x, second.iterations, second.residual,
            step=step,
        )
    )

    step = abs(s)
    while len(branch.points) < n_points:
        z1 = branch.vector(-1)
        secant = z1 - branch.vector(-2)
        secant /= np.linalg.norm(secant)

        accepted = None
        for _ in range(MAX_STEP_HALVINGS + 1):

            def residual(z, z1=z1, secant=secant, step=step):
                zw = z.copy()
                zw[0] *= weight
                return np.concatenate((system.equilibrium(z), [secant @ (zw - z1) - step]))

            prediction = z1 + step * secant
            prediction[0] /= weight
            try:
                accepted = system.solve(residual, prediction)
                break
            except EqFreeException as e:
                logger.info("corrector failed with step %.3g: %s", step, e)
                step /= 2
        if accepted is None:
            branch.status = "corrector failed after step halvings"
            break

        z, iterations, residual_norm = accepted
        values, x = system.split(z)
        if not (_within(values[p_name], p_range) and _within(x, x_range)):
            branch.status = "left range"
            break
        point = branch_point(
            family, cfg, values, x, iterations, residual_norm, step=step
        )
        branch.points.append(point)
        logger.info(
            "branch point %d: %s=%.8g x=%s stable=%s",
            len(branch.points) - 1, p_name, point.param, point.x_healed, point.stable,
        )
        step = min(2 * step, abs(s))

    branch.events = detect_events(branch)
    return branch


def stability_scan(
    family: ParameterFamily,
    cfg: EqFreeConfig,
    p_name: str,
    values: Sequence[float],
    x,
) -> Branch:
    """
    Stability of a fixed, parameter-independent equilibrium x over values.

    Used for trivial equilibria such as uniform flow, where Newton
    continuation passes through a branch point.
    """
    values = list(values)
    s = values[1] - values[0] if len(values) > 1 else 0.0
    branch = Branch(p_name=p_name, s=s, param_weight=cfg.param_weight)
    for value in values:
        branch.points.append(branch_point(family, cfg, {p_name: value}, x, step=abs(s)))
    branch.events = detect_events(branch)
    return branch


def _fold_events(branch: Branch, arclength: np.ndarray) -> List[BranchEvent]:
    params = branch.params
    dp = np.diff(params)
    events = []
    for i in range(1, len(params) - 1):
        if dp[i - 1] * dp[i] >= 0:
            continue
        window = slice(i - 1, i + 2)
        sigma = arclength[window]
        coef = np.polyfit(sigma, params[window], 2)
        tangent = np.polyder(coef)
        lo, hi = sigma[0], sigma[-1]
        if np.polyval(tangent, lo) * np.polyval(tangent, hi) < 0:
            root = brentq(lambda t: np.polyval(tangent, t), lo, hi)
        else:
            root = sigma[1]
        states = np.vstack([branch.points[j].x_unhealed for j in range(i - 1, i + 2)])
        x = np.array(
            [np.polyval(np.polyfit(sigma, states[:, k], 2), root) for k in range(states.shape[1])]
        )
        events.append(
            BranchEvent(
                kind=EventKind.FOLD,
                param=float(np.polyval(coef, root)),
                x_unhealed=x,
                index=i,
                arclength=float(root),
            )
        )
    return events


def _stability_events(
    branch: Branch, arclength: np.ndarray, folds: List[BranchEvent]
) -> List[BranchEvent]:
    radius = np.array([point.spectral_radius for point in branch.points])
    events = []
    for i in range(len(radius) - 1):
        r0, r1 = radius[i], radius[i + 1]
        if not (np.isfinite(r0) and np.isfinite(r1)) or (r0 - 1) * (r1 - 1) >= 0:
            continue
        if any(i - 1 <= fold.index <= i + 2 for fold in folds):
            continue
        theta = (1.0 - r0) / (r1 - r0)
        left, right = branch.points[i], branch.points[i + 1]
        scale = max(abs(r0), abs(r1))
        complex_pair = max(left.leading_imag, right.leading_imag) > 1e-8 * scale
        events.append(
            BranchEvent(
                kind=EventKind.HOPF if complex_pair else EventKind.STABILITY,
                param=float(left.param + theta * (right.param - left.param)),
                x_unhealed=left.x_unhealed + theta * (right.x_unhealed - left.x_unhealed),
                index=i,
                arclength=float(arclength[i] + theta * (arclength[i + 1] - arclength[i])),
            )
        )
    return events


def detect_events(branch: Branch) -> List[BranchEvent]:
    """
    Locate folds and stability changes along a branch.

    Folds are sign changes of the parameter increment, refined on a local
    quadratic in arclength by bisection on its tangent. Stability changes are
    crossings of the spectral radius through one, refined by a secant step;
    a crossing next to a fold is reported as the fold only.
    """
    if len(branch.points) < 2:
        return []
    arclength = branch.arclengths()
    folds = _fold_events(branch, arclength)
    events = folds + _stability_events(branch, arclength, folds)
    return sorted(events, key=lambda event: event.arclength)


@dataclass
class Curve:
    """
    A curve of codimension-one points in two parameters.

    Each row of `points` is (p1, p2, x...); Hopf curves carry no x.
    """

    p1_name: str
    p2_name: str
    points: List[np.ndarray] = field(default_factory=list)
    status: str = "complete"

    def as_array(self) -> np.ndarray:
        """
        All points stacked into one array.
        """
        if not self.points:
            return np.zeros((0, 2))
        return np.vstack(self.points)


def fold_continue_2par(
    family: ParameterFamily,
    cfg: EqFreeConfig,
    p1_name: str,
    fold_seed,
    p2_name: str,
    s: float,
    n_points: int,
    p2_range: Optional[Tuple[float, float]] = None,
) -> Curve:
    """
    Continue a fold in (p1, p2).

    Unknowns are (p1, p2, x); equations are the equilibrium condition, the
    fold condition det(B^-1 A - I) = 0 and the pseudo-arclength condition.
    The seed needs `param` (a p1 value) and `x_unhealed`; p2 starts at its
    value in the family.
    """
    curve = Curve(p1_name=p1_name, p2_name=p2_name)
    system = ExtendedSystem(family, cfg, (p1_name, p2_name))

    def fixed_p2(p2):
        def residual(y):
            z = np.concatenate(([y[0], p2], y[1:]))
            return np.concatenate((system.equilibrium(z), [system.fold_test(z)]))

        return residual

    p2 = family.value(p2_name)
    y0 = np.concatenate(([fold_seed.param], np.atleast_1d(fold_seed.x_unhealed)))
    try:
        y, _, _ = system.solve(fixed_p2(p2), y0)
        curve.points.append(np.concatenate(([y[0], p2], y[1:])))
        p2_next = p2 + s
        y, _, _ = system.solve(fixed_p2(p2_next), y)
        curve.points.append(np.concatenate(([y[0], p2_next], y[1:])))
    except EqFreeException as e:
        curve.status = f"seed correction failed: {e}"
        return curve

    while len(curve.points) < n_points:
        z1 = curve.points[-1]
        secant = z1 - curve.points[-2]
        secant /= np.linalg.norm(secant)

        def residual(z, z1=z1, secant=secant):
            return np.concatenate(
                (system.equilibrium(z), [system.fold_test(z), secant @ (z - z1) - abs(s)])
            )

        try:
            z, _, _ = system.solve(residual, z1 + abs(s) * secant)
        except EqFreeException as e:
            curve.status = f"corrector failed: {e}"
            break
        if not _within(z[1], p2_range):
            curve.status = "left range"
            break
        curve.points.append(z)
        logger.info("fold point %s=%.8g %s=%.8g", p1_name, z[0], p2_name, z[1])
    return curve


class EigenvalueOnset:
    """
    Onset test function max|lambda| - 1 at a coarse equilibrium.

    With `track` the equilibrium is re-solved from the warm start x at every
    evaluation; otherwise x is a parameter-independent equilibrium. The warm
    start only moves through accept(), so concurrent evaluations see the
    same x.
    """

    # pylint: disable=too-many-arguments
    def __init__(
        self,
        family: ParameterFamily,
        cfg: EqFreeConfig,
        x,
        p1_name: str,
        p2_name: str,
        track: bool = False,
    ):
        self.family = family
        self.cfg = cfg
        self.x = np.atleast_1d(np.asarray(x, dtype=float))
        self.p1_name = p1_name
        self.p2_name = p2_name
        self.track = track

    def equilibrium(self, p1: float, p2: float) -> Tuple[OperatorPair, np.ndarray]:
        """
        Operators at (p1, p2) and the equilibrium the test is evaluated at.
        """
        ops = self.family.at(**{self.p1_name: p1, self.p2_name: p2})
        if not self.track:
            return ops, self.x
        return ops, find_equilibrium(ops, self.cfg, self.x).x

    def accept(self, p1: float, p2: float):
        """
        Move the warm start to the equilibrium at an accepted onset point.
        """
        if self.track:
            self.x = self.equilibrium(p1, p2)[1]

    def __call__(self, p1: float, p2: float) -> float:
        ops, x = self.equilibrium(p1, p2)
        return float(np.max(np.abs(stability(ops, self.cfg, x)))) - 1.0


def _bracketed_root(onset: Callable, origin, normal, width: float, xtol: float, samples: int):
    thetas = np.linspace(-width, width, samples)
    points = [origin + theta * normal for theta in thetas]
    values = np.array(evaluate_all(lambda z: onset(z[0], z[1]), points))
    order = np.argsort(np.abs(thetas[:-1] + thetas[1:]))
    for k in order:
        if values[k] == 0:
            return points[k]
        if values[k] * values[k + 1] < 0:
            theta = brentq(
                lambda t: onset(*(origin + t * normal)), thetas[k], thetas[k + 1], xtol=xtol
            )
            return origin + theta * normal
    return None


# pylint: disable=too-many-arguments
def hopf_continue_2par(
    family: ParameterFamily,
    cfg: EqFreeConfig,
    onset: Callable[[float, float], float],
    p1_name: str,
    hopf_seed: Tuple[float, float],
    p2_name: str,
    s: float,
    n_points: int,
    width: Optional[float] = None,
    samples: int = 9,
) -> Curve:
    """
    Continue an onset point in (p1, p2) by prediction and subspace search.

    The predictor extrapolates linearly along the curve (the first prediction
    moves p2 by s). The corrector searches the line through the prediction
    perpendicular to the predicted direction for a sign change of the onset
    test function and refines it by bisection. After each accepted point the
    onset's accept(p1, p2) hook, if it has one, runs serially.
    """
    del family  # parameters enter only through onset
    width = 2.0 * abs(s) if width is None else width
    xtol = max(cfg.newton_tol, 1e-6 * width)
    curve = Curve(p1_name=p1_name, p2_name=p2_name)
    accept = getattr(onset, "accept", None)

    seed = np.asarray(hopf_seed, dtype=float)
    corrected = _bracketed_root(onset, seed, np.array([1.0, 0.0]), width, xtol, samples)
    if corrected is None:
        curve.status = "onset not bracketed at seed"
        return curve
    curve.points.append(corrected)
    if accept is not None:
        accept(*corrected)

    direction = np.array([0.0, np.sign(s) or 1.0])
    while len(curve.points) < n_points:
        prediction = curve.points[-1] + abs(s) * direction
        normal = np.array([-direction[1], direction[0]])
        corrected = _bracketed_root(onset, prediction, normal, width, xtol, samples)
        if corrected is None:
            curve.status = "onset not bracketed within search width"
            break
        direction = corrected - curve.points[-1]
        direction /= np.linalg.norm(direction)
        curve.points.append(corrected)
        if accept is not None:
            accept(*corrected)
        logger.info("onset point %s=%.8g %s=%.8g", p1_name, corrected[0], p2_name, corrected[1])
    return curve
