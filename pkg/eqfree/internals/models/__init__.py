"""
Registry of the microscopic models eqfree can analyze.
"""

from typing import Optional

from eqfree.errors import ConfigError
from eqfree.internals.operators import Model

from .pedestrian import PedestrianModel
from .testsystems import TestSystemModel
from .traffic import TrafficModel

MODELS = {
    "traffic": TrafficModel,
    "pedestrian": PedestrianModel,
    "testsystem": TestSystemModel,
}


def model_names():
    """
    Names of all registered models.
    """
    return tuple(MODELS)


def get_model(name: str, system: Optional[str] = None) -> Model:
    """
    Instantiate a registered model by name.

    `system` selects the test system for the `testsystem` model.
    """
    if name not in MODELS:
        raise ConfigError(f"unknown model {name!r}, expected one of {', '.join(MODELS)}")
    if name == "testsystem":
        return TestSystemModel(system or "fold")
    return MODELS[name]()
