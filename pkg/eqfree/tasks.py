"""
Built-in experiment tasks.

Each task reads its options from the [task] section of an experiment file
and writes CSV files into the output directory.
"""

import logging

import numpy as np

from eqfree.errors import ConfigError, NewtonDivergence, SolverError
from eqfree.internals.coarse import find_equilibrium, healing_diagnostic, projective_integrate
from eqfree.internals.continuation import (
    Branch,
    EigenvalueOnset,
    EventKind,
    branch_point,
    continue_branch,
    fold_continue_2par,
    hopf_continue_2par,
    stability_scan,
)
from eqfree.internals.microsim import trajectory
from eqfree.internals.models.pedestrian import dump_snapshot
from eqfree.internals.models.traffic import hopf_v0
from eqfree.internals.poincare import AmplitudeOnset, oscillation_amplitude, scan_onset
from eqfree.internals.storage import (
    event_line,
    format_number,
    write_branch,
    write_curve,
    write_diagnostic,
    write_series,
)
from eqfree.internals.task import RunContext, task
from eqfree.internals.utils import crossing, macro_start, start_value, with_param

logger = logging.getLogger(__name__)

ALL_MODELS = ("traffic", "pedestrian", "testsystem")
EQUILIBRIUM_MODELS = ("traffic", "testsystem")


def _setup(ctx: RunContext):
    family = ctx.experiment.family()
    ops = family.at()
    x0 = macro_start(ctx.options.x_start, ops.macro_dim)
    return family, ctx.experiment.eqfree, ctx.options, ops, x0


def _amplitude_mode(ctx: RunContext) -> bool:
    if ctx.experiment.model == "pedestrian" and ctx.options.onset != "amplitude":
        raise ConfigError("pedestrian experiments need 'onset = amplitude' in [task]")
    return ctx.options.onset == "amplitude"


def _state_columns(dim: int):
    return [f"x_{k}" for k in range(dim)]


@task(name="simulate", models=ALL_MODELS)
def simulate(ctx: RunContext):
    """
    Lift x_start and record the restriction along a direct simulation.
    """
    family, cfg, opts, ops, x0 = _setup(ctx)
    times, states = trajectory(ops.system, ops.lift(x0), opts.duration, cfg.dt, opts.every)
    rows = ([t, *ops.restrict(u)] for t, u in zip(times, states))
    columns = ["t", *_state_columns(ops.macro_dim)]
    written = [write_series(ctx.output_path(), ctx.text, "eqfree simulation", columns, rows)]
    if ctx.experiment.model == "pedestrian":
        path = ctx.output_path("snapshot").with_suffix(".txt")
        dump_snapshot(path, states[-1], family.params, float(times[-1]))
        written.append(path)
    return written


@task(name="equilibrium", models=EQUILIBRIUM_MODELS)
def equilibrium(ctx: RunContext):
    """
    Coarse equilibrium near x_start with its eigenvalues.
    """
    family, cfg, opts, ops, x0 = _setup(ctx)
    eq = find_equilibrium(ops, cfg, x0)
    values = {opts.p_name: family.value(opts.p_name)} if opts.p_name else {}
    point = branch_point(family, cfg, values, eq.x, eq.iterations, eq.residual)
    branch = Branch(p_name=opts.p_name or "none", s=0.0, points=[point], status="converged")
    return [write_branch(ctx.output_path(), ctx.text, branch)]


def _continue(family, cfg, opts, x0):
    return continue_branch(
        family,
        cfg,
        opts.p_name,
        start_value(family, opts.p_name, opts.p_start),
        x0,
        opts.s,
        opts.n_points,
        p_range=opts.p_range,
        x_range=opts.x_range,
    )


@task(name="branch", models=EQUILIBRIUM_MODELS, requires=("p_name",))
def branch(ctx: RunContext):
    """
    Pseudo-arclength continuation of coarse equilibria in p_name.

    With scan_values, the equilibrium x = 0 is scanned for stability at
    those parameter values too and its events are listed with the branch.
    """
    family, cfg, opts, ops, x0 = _setup(ctx)
    result = _continue(family, cfg, opts, x0)
    extra = []
    if result.points:
        last = result.points[-1]
        extra.append(
            f"end param={format_number(last.param)} "
            f"x_healed={' '.join(format_number(v) for v in last.x_healed)}"
        )
    written = []
    if opts.scan_values:
        fixed = stability_scan(family, cfg, opts.p_name, opts.scan_values, np.zeros(ops.macro_dim))
        extra.extend(event_line(event, "fixed") for event in fixed.events)
        written.append(write_branch(ctx.output_path("fixed"), ctx.text, fixed, label="fixed"))
    written.insert(0, write_branch(ctx.output_path(), ctx.text, result, extra))
    return written


def _traffic_columns(ctx: RunContext, curve):
    """
    Analytic Hopf values of v0 next to a traffic curve in (v0, h).
    """
    if ctx.experiment.model != "traffic" or {curve.p1_name, curve.p2_name} != {"v0", "h"}:
        return None
    points = curve.as_array()
    h_values = points[:, 0] if curve.p1_name == "h" else points[:, 1]
    params = ctx.experiment.params
    return {"v0_hopf_analytic": [hopf_v0(params, h) for h in h_values]}


@task(name="fold2par", models=EQUILIBRIUM_MODELS, requires=("p_name", "p2_name"))
def fold2par(ctx: RunContext):
    """
    Continue the first fold of a branch in (p_name, p2_name).
    """
    family, cfg, opts, _ops, x0 = _setup(ctx)
    result = _continue(family, cfg, opts, x0)
    folds = [event for event in result.events if event.kind is EventKind.FOLD]
    if not folds:
        raise SolverError(f"no fold found along the branch in {opts.p_name} ({result.status})")
    logger.info("fold seed %s=%.8g", opts.p_name, folds[0].param)
    curve = fold_continue_2par(
        family, cfg, opts.p_name, folds[0], opts.p2_name, opts.s2, opts.n_points2, opts.p2_range
    )
    return [write_curve(ctx.output_path(), ctx.text, curve, _traffic_columns(ctx, curve))]


def _eigenvalue_seed(family, cfg, opts, x0) -> float:
    if not opts.scan_values:
        return start_value(family, opts.p_name, opts.p_start)
    scan = stability_scan(family, cfg, opts.p_name, opts.scan_values, x0)
    changes = [e for e in scan.events if e.kind in (EventKind.HOPF, EventKind.STABILITY)]
    if not changes:
        raise SolverError(f"no stability change over the scanned values of {opts.p_name}")
    return changes[0].param


@task(name="hopf2par", models=ALL_MODELS, requires=("p_name", "p2_name"))
def hopf2par(ctx: RunContext):
    """
    Continue an oscillation onset in (p_name, p2_name).

    The onset test is max|lambda| - 1 at x_start, or the Poincare amplitude
    minus threshold with 'onset = amplitude'.
    """
    family, cfg, opts, _ops, x0 = _setup(ctx)
    p2 = family.value(opts.p2_name)
    if _amplitude_mode(ctx):
        onset = AmplitudeOnset(
            family, cfg, x0, opts.p_name, opts.p2_name, opts.n_maps, opts.t_max, opts.threshold
        )
        if opts.p_range:
            seed = scan_onset(lambda v: onset(v, p2), *opts.p_range, xtol=abs(opts.s2) * 0.1)
        else:
            seed = start_value(family, opts.p_name, opts.p_start)
    else:
        onset = EigenvalueOnset(family, cfg, x0, opts.p_name, opts.p2_name, track=opts.track)
        seed = _eigenvalue_seed(family, cfg, opts, x0)
    logger.info("onset seed %s=%.8g %s=%.8g", opts.p_name, seed, opts.p2_name, p2)
    curve = hopf_continue_2par(
        family,
        cfg,
        onset,
        opts.p_name,
        (seed, p2),
        opts.p2_name,
        opts.s2,
        opts.n_points2,
        width=opts.width,
    )
    return [write_curve(ctx.output_path(), ctx.text, curve, _traffic_columns(ctx, curve))]


@task(name="healing-diagnostic", models=ALL_MODELS, requires=("lift_param", "lift_values"))
def healing(ctx: RunContext):
    """
    Separation of two liftings of x_start after healing.
    """
    family, cfg, opts, ops, x0 = _setup(ctx)
    if len(opts.lift_values) != 2:
        raise ConfigError("lift_values must hold exactly two values")
    u0, u1 = (with_param(family, opts.lift_param, v).at().lift(x0) for v in opts.lift_values)
    profile = healing_diagnostic(ops, cfg, u0, u1, opts.horizon, opts.every)
    logger.info(
        "healing fit epsilon=%.4g gamma=%.4g log C=%.4g",
        profile.epsilon,
        profile.gamma,
        profile.log_c,
    )
    return [write_diagnostic(ctx.output_path(), ctx.text, profile)]


@task(name="projective", models=EQUILIBRIUM_MODELS)
def projective(ctx: RunContext):
    """
    Projective forward Euler integration from x_start.
    """
    _family, cfg, opts, ops, x0 = _setup(ctx)
    columns = ["step", "t", *_state_columns(ops.macro_dim)]

    def rows(points):
        return ([k, k * opts.dt_macro, *x] for k, x in enumerate(points))

    try:
        points = projective_integrate(ops, cfg, x0, opts.dt_macro, opts.n_steps)
    except NewtonDivergence as e:
        if e.trajectory is not None:
            title = "eqfree projective (partial)"
            write_series(ctx.output_path(), ctx.text, title, columns, rows(e.trajectory))
        raise
    return [write_series(ctx.output_path(), ctx.text, "eqfree projective", columns, rows(points))]


@task(name="scan", models=ALL_MODELS, requires=("p_name", "scan_values"))
def scan(ctx: RunContext):
    """
    Oscillation amplitude or stability of x_start over scan_values.
    """
    family, cfg, opts, ops, x0 = _setup(ctx)
    if not _amplitude_mode(ctx):
        fixed = stability_scan(family, cfg, opts.p_name, opts.scan_values, x0)
        return [write_branch(ctx.output_path(), ctx.text, fixed)]

    rows, amplitudes = [], []
    for value in opts.scan_values:
        ops = with_param(family, opts.p_name, value).at()
        result = oscillation_amplitude(ops, cfg, x0, opts.n_maps, opts.t_max, opts.threshold)
        amplitudes.append(result.amplitude)
        rows.append(
            [value, result.amplitude, result.m_max, result.m_min, result.period, result.blocked]
        )
        logger.info("%s=%.6g amplitude %.4g", opts.p_name, value, result.amplitude)
    columns = [opts.p_name, "amplitude", "m_max", "m_min", "period", "blocked"]
    notes = []
    onset = crossing(opts.scan_values, amplitudes, opts.threshold)
    if onset is not None:
        logger.info("onset after scan point %d at %s=%.6g", onset[0], opts.p_name, onset[1])
        notes.append(f"onset param={format_number(onset[1])} index={onset[0]}")
    title = f"eqfree amplitude scan in {opts.p_name}"
    return [write_series(ctx.output_path(), ctx.text, title, columns, rows, notes)]
