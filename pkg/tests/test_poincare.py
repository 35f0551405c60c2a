"""
Poincare sections of coarse oscillations, on closed-form test systems.
"""

import numpy as np
import pytest

from eqfree.errors import SolverError
from eqfree.internals.operators import EqFreeConfig
from eqfree.internals.poincare import (
    AmplitudeOnset,
    oscillation_amplitude,
    poincare_map,
    scan_onset,
)

from .conftest import make_family

CFG = EqFreeConfig(t_skip=1.0, t0=1.0, dt=1e-3)


class TestPoincareMap:
    def test_oscillator(self):
        ops = make_family("oscillator").at()
        result = poincare_map(ops, CFG, [0.0, 1.0])
        assert not result.blocked
        assert result.period == pytest.approx(2 * np.pi, abs=1e-6)
        assert result.crossing_time == pytest.approx(2.5 * np.pi, abs=1e-6)
        assert result.amplitude == pytest.approx(1.0, abs=1e-5)
        assert result.x_next == pytest.approx([1.0, 0.0], abs=1e-6)

    def test_small_swings_do_not_count_as_crossings(self):
        ops = make_family("oscillator").at()
        assert not poincare_map(ops, CFG, [1e-3, 0.0], t_max=20.0).blocked
        result = poincare_map(ops, CFG, [1e-3, 0.0], t_max=20.0, prominence=0.01)
        assert result.blocked
        assert result.amplitude == 0.0

    def test_prominent_swings_keep_their_crossings(self):
        ops = make_family("oscillator").at()
        plain = poincare_map(ops, CFG, [0.0, 1.0])
        gated = poincare_map(ops, CFG, [0.0, 1.0], prominence=0.9)
        assert gated.crossing_time == pytest.approx(plain.crossing_time, abs=1e-9)
        assert gated.amplitude == pytest.approx(plain.amplitude, abs=1e-9)

    def test_damped_spiral_is_blocked(self):
        ops = make_family("hopf", p=-5.0).at()
        result = poincare_map(ops, CFG, [0.5, 0.0], t_max=50.0)
        assert result.blocked
        assert result.amplitude == 0.0
        assert np.isnan(result.period)
        assert np.all(np.abs(result.x_next) < 1e-6)


class TestAmplitude:
    def test_two_maps_of_the_oscillator(self):
        ops = make_family("oscillator").at()
        result = oscillation_amplitude(ops, CFG, [1.0, 0.0], n_maps=2)
        assert not result.blocked
        assert result.amplitude == pytest.approx(1.0, abs=1e-5)

    def test_limit_cycle_radius(self):
        onset = AmplitudeOnset(make_family("hopf"), CFG, [0.5, 0.0], "p", "p2")
        assert onset(0.25, 0.0) == pytest.approx(0.5 - 1e-3, abs=1e-4)

    def test_below_threshold_counts_as_blocked(self):
        ops = make_family("oscillator").at()
        result = oscillation_amplitude(ops, CFG, [5e-5, 0.0], t_max=20.0)
        assert result.blocked
        assert result.amplitude == 0.0


class TestScanOnset:
    def test_root(self):
        assert scan_onset(lambda v: v - 0.3, 0.0, 1.0, xtol=1e-8) == pytest.approx(0.3, abs=1e-8)

    def test_not_bracketed(self):
        with pytest.raises(SolverError, match="not bracketed"):
            scan_onset(lambda v: v + 1.0, 0.0, 1.0)
