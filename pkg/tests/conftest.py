"""
Shared fixtures.
"""

import numpy as np
import pytest

from eqfree import config
from eqfree.internals.models.testsystems import TestParams, TestSystemModel
from eqfree.internals.models.traffic import OVParams, ReferenceProfile
from eqfree.internals.operators import ParameterFamily


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """
    Keep process-wide settings and reference caches per test.
    """
    monkeypatch.setattr(config, "THREADS", 1)
    monkeypatch.setattr(config, "DEBUG", False)
    monkeypatch.setattr(config, "REFERENCE_DIR", str(tmp_path / "references"))
    monkeypatch.setattr(config, "OUTPUT_DIR", str(tmp_path / "out"))


def make_family(system: str, **values) -> ParameterFamily:
    """
    A test system bound to parameters.
    """
    return ParameterFamily(TestSystemModel(system), TestParams(system=system, **values))


@pytest.fixture
def fold_family():
    return make_family("fold", p=1.0)


@pytest.fixture
def decay_family():
    return make_family("decay", rate=1.0)


@pytest.fixture
def small_ring():
    """
    A ring of 10 cars with the default reaction time.
    """
    return OVParams(N=10, L=10.0, v0=0.9, h=1.2)


@pytest.fixture
def jam_reference(small_ring):
    """
    Synthetic single-jam reference profile for the small ring.
    """
    n = small_ring.N
    gaps = 1.0 + 0.4 * np.cos(2.0 * np.pi * np.arange(n) / n)
    gaps *= small_ring.L / np.sum(gaps)
    return ReferenceProfile(gaps, np.zeros(n))
