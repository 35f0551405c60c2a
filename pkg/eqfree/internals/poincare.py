"""
Poincare sections of coarse oscillations.

The coarse state is (m, mdot). The section is mdot = 0 with m'' < 0, the
upper turning points of m.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from eqfree.errors import SolverError
from eqfree.internals.microsim import rk4_step
from eqfree.internals.operators import EqFreeConfig, OperatorPair, ParameterFamily, as_macro

logger = logging.getLogger(__name__)

DEFAULT_T_MAX = 1000.0
DEFAULT_HYSTERESIS = 1e-4
AMPLITUDE_THRESHOLD = 1e-3


# pylint: disable=too-many-instance-attributes
@dataclass
class PoincareResult:
    """
    Outcome of one application of the Poincare map.

    A blocked state has no second crossing before the time cap; it reports
    amplitude 0 and the coarse state at the cap.
    """

    x_next: np.ndarray
    crossing_time: float
    period: float
    amplitude: float
    m_max: float
    m_min: float
    blocked: bool


class _Crossings:
    """
    Downward zero crossings of mdot, armed once mdot exceeds the hysteresis.
    """

    def __init__(self, hysteresis: float):
        self.hysteresis = hysteresis
        self.armed = False

    def update(self, mdot_prev: float, mdot: float) -> bool:
        if mdot > self.hysteresis:
            self.armed = True
        if self.armed and mdot_prev > 0 >= mdot:
            self.armed = False
            return True
        return False


# pylint: disable=too-many-arguments,too-many-locals
def poincare_map(
    ops: OperatorPair,
    cfg: EqFreeConfig,
    x0,
    t_max: float = DEFAULT_T_MAX,
    hysteresis: float = DEFAULT_HYSTERESIS,
    u0: Optional[np.ndarray] = None,
    prominence: float = 0.0,
) -> PoincareResult:
    """
    Lift x0, evolve, and return the coarse state at the second crossing of
    the section.

    The first crossing ends the healing transient. Crossings are bracketed on
    the micro steps and refined by bisection in the length of the last step.
    A crossing only counts once m has spanned at least `prominence` since
    the previous counted crossing (or since the start). The amplitude is half
    the range of m between the two crossings.
    """
    x0 = as_macro(x0, ops.macro_dim)
    u = ops.lift(x0) if u0 is None else np.array(u0, dtype=float)
    detector = _Crossings(hysteresis)

    def mdot_after(state, h):
        return float(ops.restrict(rk4_step(ops.system, state, h))[1])

    t = 0.0
    m, mdot = (float(v) for v in ops.restrict(u)[:2])
    crossings = []
    span_max = span_min = m
    m_max, m_min = -np.inf, np.inf
    while t < t_max:
        u_next = rk4_step(ops.system, u, cfg.dt)
        m_next, mdot_next = (float(v) for v in ops.restrict(u_next)[:2])
        span_max, span_min = max(span_max, m_next), min(span_min, m_next)
        if detector.update(mdot, mdot_next) and span_max - span_min >= prominence:
            h = brentq(lambda s, u=u: mdot_after(u, s), 0.0, cfg.dt)
            crossing = rk4_step(ops.system, u, h)
            m_cross = float(ops.restrict(crossing)[0])
            crossings.append((t + h, crossing))
            logger.debug("section crossing %d at t=%.6g", len(crossings), t + h)
            if len(crossings) == 2:
                t_first, t_second = crossings[0][0], crossings[1][0]
                m_max = max(m_max, m_cross)
                return PoincareResult(
                    x_next=np.atleast_1d(ops.restrict(crossing)).astype(float),
                    crossing_time=t_second,
                    period=t_second - t_first,
                    amplitude=0.5 * (m_max - m_min),
                    m_max=m_max,
                    m_min=m_min,
                    blocked=False,
                )
            m_max, m_min = m_cross, np.inf
            span_max = span_min = m_cross
        if crossings:
            m_max = max(m_max, m_next)
            m_min = min(m_min, m_next)
        u, mdot = u_next, mdot_next
        t += cfg.dt

    logger.debug("no recurrent section crossings within t=%g, state is blocked", t_max)
    x_end = np.atleast_1d(ops.restrict(u)).astype(float)
    return PoincareResult(
        x_next=x_end,
        crossing_time=float("nan"),
        period=float("nan"),
        amplitude=0.0,
        m_max=float(x_end[0]),
        m_min=float(x_end[0]),
        blocked=True,
    )


def oscillation_amplitude(
    ops: OperatorPair,
    cfg: EqFreeConfig,
    x0,
    n_maps: int = 2,
    t_max: float = DEFAULT_T_MAX,
    threshold: float = AMPLITUDE_THRESHOLD,
) -> PoincareResult:
    """
    Iterate the Poincare map n_maps times from x0 and report the last image.

    Section crossings need m to span at least threshold since the previous
    one, and amplitudes below threshold count as blocked.
    """
    result = None
    x = x0
    for _ in range(n_maps):
        result = poincare_map(ops, cfg, x, t_max=t_max, prominence=threshold)
        if result.blocked or result.amplitude < threshold:
            result.amplitude = 0.0
            result.blocked = True
            break
        x = np.array([result.x_next[0], 0.0])
    return result


class AmplitudeOnset:
    """
    Onset test function amplitude - threshold for two-parameter continuation.
    """

    # pylint: disable=too-many-arguments
    def __init__(
        self,
        family: ParameterFamily,
        cfg: EqFreeConfig,
        x0,
        p1_name: str,
        p2_name: str,
        n_maps: int = 2,
        t_max: float = DEFAULT_T_MAX,
        threshold: float = AMPLITUDE_THRESHOLD,
    ):
        self.family = family
        self.cfg = cfg
        self.x0 = x0
        self.p1_name = p1_name
        self.p2_name = p2_name
        self.n_maps = n_maps
        self.t_max = t_max
        self.threshold = threshold

    def __call__(self, p1: float, p2: float) -> float:
        ops = self.family.at(**{self.p1_name: p1, self.p2_name: p2})
        result = oscillation_amplitude(
            ops, self.cfg, self.x0, self.n_maps, self.t_max, self.threshold
        )
        logger.info(
            "amplitude at %s=%.6g %s=%.6g: %.4g",
            self.p1_name, p1, self.p2_name, p2, result.amplitude,
        )
        return result.amplitude - self.threshold


def scan_onset(
    onset: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 1e-3,
) -> float:
    """
    Parameter value in [lo, hi] where onset changes sign, by bisection.
    """
    f_lo, f_hi = onset(lo), onset(hi)
    if f_lo * f_hi > 0:
        raise SolverError(f"onset not bracketed in [{lo:.6g}, {hi:.6g}]")
    return float(brentq(onset, lo, hi, xtol=xtol))
