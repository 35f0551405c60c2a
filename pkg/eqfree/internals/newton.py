"""
Damped Newton iteration with forward-difference Jacobians.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from eqfree import config
from eqfree.errors import (
    BlowUpError,
    LiftingDomainError,
    NewtonDivergence,
    SingularJacobianError,
)

logger = logging.getLogger(__name__)

Residual = Callable[[np.ndarray], np.ndarray]


@dataclass
class NewtonResult:
    """
    Converged Newton iterate with diagnostics.
    """

    x: np.ndarray
    fx: np.ndarray
    residual: float
    iterations: int


def evaluate_all(func: Callable, points: Sequence) -> List:
    """
    Evaluate func at independent points, in parallel when config.THREADS > 1.
    """
    if config.THREADS > 1 and len(points) > 1:
        return Parallel(n_jobs=config.THREADS, prefer="threads")(
            delayed(func)(p) for p in points
        )
    return [func(p) for p in points]


def fd_jacobian(func: Residual, y: np.ndarray, fy: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """
    Forward-difference Jacobian of func at y, one column per component.
    """
    points = []
    for j, h in enumerate(steps):
        point = y.copy()
        point[j] += h
        points.append(point)
    columns = evaluate_all(func, points)
    jac = np.empty((len(fy), len(y)))
    for j, (fj, h) in enumerate(zip(columns, steps)):
        jac[:, j] = (np.asarray(fj) - fy) / h
    return jac


def weakest_column(matrix: np.ndarray) -> int:
    """
    Index of the column closest to the span of the columns before it.
    """
    _q, r = np.linalg.qr(matrix)
    return int(np.argmin(np.abs(np.diag(r))))


def check_conditioning(matrix: np.ndarray, what: str, cond_max: float):
    """
    Raise SingularJacobianError if matrix cannot be safely inverted.
    """
    if not np.isfinite(matrix).all():
        raise SingularJacobianError(f"{what} has non-finite entries")
    cond = np.linalg.cond(matrix)
    if not np.isfinite(cond) or cond > cond_max:
        raise SingularJacobianError(
            f"{what} is numerically singular (cond={cond:.3e})", weakest_column(matrix)
        )


# pylint: disable=too-many-arguments,too-many-locals
def newton(
    residual: Residual,
    y0,
    steps: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-8,
    max_iter: int = 20,
    max_halvings: int = 8,
    cond_max: float = 1e10,
    jacobian: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    fy0: Optional[np.ndarray] = None,
) -> NewtonResult:
    """
    Solve residual(y) = 0 starting from y0.

    Full Newton steps are halved up to max_halvings times while the residual
    norm increases. The iteration stops once both the last step and the
    residual norm are no larger than tol. Trial points the model rejects
    count as residual increases.
    """
    y = np.array(y0, dtype=float)
    fy = residual(y) if fy0 is None else np.asarray(fy0, dtype=float)
    rnorm = float(np.linalg.norm(fy))

    for iteration in range(1, max_iter + 1):
        if jacobian is None:
            jac = fd_jacobian(residual, y, fy, steps(y))
        else:
            jac = jacobian(y, fy)
        check_conditioning(jac, "Jacobian", cond_max)
        direction = -np.linalg.solve(jac, fy)

        lam = 1.0
        trial, ftrial, tnorm = y, fy, np.inf
        for halving in range(max_halvings + 1):
            trial = y + lam * direction
            try:
                ftrial = residual(trial)
                tnorm = float(np.linalg.norm(ftrial))
            except (LiftingDomainError, BlowUpError) as e:
                logger.debug("newton trial rejected: %s", e)
                tnorm = np.inf
            if tnorm <= rnorm or (halving == max_halvings and np.isfinite(tnorm)):
                break
            lam *= 0.5
        if not np.isfinite(tnorm):
            raise NewtonDivergence("no admissible Newton step", rnorm, iteration)

        step = float(np.linalg.norm(lam * direction))
        y, fy, rnorm = trial, np.asarray(ftrial, dtype=float), tnorm
        logger.debug(
            "newton iteration %d: step=%.3e residual=%.3e damping=%g",
            iteration, step, rnorm, lam,
        )
        if step <= tol and rnorm <= tol:
            return NewtonResult(x=y, fx=fy, residual=rnorm, iterations=iteration)

    raise NewtonDivergence("Newton iteration did not converge", rnorm, max_iter)
