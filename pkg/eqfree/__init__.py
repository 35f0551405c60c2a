"""
EQFREE, equation-free coarse bifurcation analysis of microscopic models.

Continuation, stability and onset detection work on a macroscopic state
through lifting, short microscopic bursts and restriction, never through
closed macroscopic equations.
"""

from eqfree.errors import (
    BlowUpError,
    ConfigError,
    DegenerateConfigurationError,
    EqFreeException,
    LiftingDomainError,
    ModelDomainError,
    NewtonDivergence,
    SingularJacobianError,
    SolverError,
)
from eqfree.internals.coarse import (
    coarse_rhs,
    find_equilibrium,
    healing_diagnostic,
    phi_explicit,
    phi_implicit,
    projective_integrate,
    stability,
)
from eqfree.internals.continuation import (
    continue_branch,
    detect_events,
    fold_continue_2par,
    hopf_continue_2par,
    stability_scan,
)
from eqfree.internals.experiment import ExperimentConfig, dump_config, load_config
from eqfree.internals.microsim import MicroSystem, integrate, trajectory
from eqfree.internals.models import get_model
from eqfree.internals.operators import EqFreeConfig, Model, OperatorPair, ParameterFamily
from eqfree.internals.poincare import oscillation_amplitude, poincare_map, scan_onset
from eqfree.internals.task import task

__all__ = [
    "BlowUpError",
    "ConfigError",
    "DegenerateConfigurationError",
    "EqFreeConfig",
    "EqFreeException",
    "ExperimentConfig",
    "LiftingDomainError",
    "MicroSystem",
    "Model",
    "ModelDomainError",
    "NewtonDivergence",
    "OperatorPair",
    "ParameterFamily",
    "SingularJacobianError",
    "SolverError",
    "coarse_rhs",
    "continue_branch",
    "detect_events",
    "dump_config",
    "find_equilibrium",
    "fold_continue_2par",
    "get_model",
    "healing_diagnostic",
    "hopf_continue_2par",
    "integrate",
    "load_config",
    "oscillation_amplitude",
    "phi_explicit",
    "phi_implicit",
    "poincare_map",
    "projective_integrate",
    "scan_onset",
    "stability",
    "stability_scan",
    "task",
    "trajectory",
]
