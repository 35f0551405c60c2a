"""
Counterflow through a door: forces, the (m, mdot) restriction and lifting.
"""

import numpy as np
import pytest

from eqfree.errors import (
    ConfigError,
    DegenerateConfigurationError,
    LiftingDomainError,
    ModelDomainError,
)
from eqfree.internals.microsim import integrate, trajectory
from eqfree.internals.models import pedestrian
from eqfree.internals.models.pedestrian import (
    CrowdState,
    DensityLine,
    PedestrianModel,
    PedParams,
    default_density,
    desired_direction,
    desired_velocity,
    door_occupancy,
    dump_snapshot,
    fit_density,
    front_distance,
    lift_linear,
    load_snapshot,
    mirror,
    passage_weights,
    pedestrian_forces,
    restrict_m,
    sf_rhs,
    wall_forces,
)
from eqfree.internals.operators import ParameterFamily
from eqfree.internals.poincare import oscillation_amplitude, scan_onset


@pytest.fixture
def small_crowds():
    return PedParams(N_per_crowd=10)


@pytest.fixture
def lifted(small_crowds):
    return lift_linear([0.3, 0.0], default_density(small_crowds), small_crowds)


def moving(u, params, seed=3):
    """
    The state u with random velocities and impatience.
    """
    rng = np.random.default_rng(seed)
    n = params.crowd_size
    u = u.copy()
    u[2 * n : 4 * n] = rng.normal(0.0, 0.5, 2 * n)
    u[4 * n :] = rng.uniform(0.0, 1.0, n)
    return u


def pair_state(x, y, impatience=(0.0, 0.0)):
    """
    State of one blue and one red pedestrian at rest.
    """
    return np.concatenate((x, y, np.zeros(2), np.zeros(2), impatience))


class TestParameters:
    def test_defaults(self):
        params = PedParams()
        assert (params.N_per_crowd, params.w, params.r_v0, params.v0) == (100, 0.7, 1.0, 1.34)
        assert params.crowd_size == 200

    def test_door_wider_than_corridor(self):
        with pytest.raises(ConfigError):
            PedParams(w=6.0)

    def test_non_positive_speed(self):
        with pytest.raises(ConfigError):
            PedParams(v0=0.0)

    @pytest.mark.parametrize("patience", [0.0, 1.0, 1.5])
    def test_patience_inside_unit_interval(self, patience):
        with pytest.raises(ConfigError):
            PedParams(patience=patience)

    def test_nervous_factor_at_least_one(self):
        with pytest.raises(ConfigError):
            PedParams(nervous_factor=0.5)


class TestForces:
    def test_desired_speeds(self):
        params = PedParams(N_per_crowd=2, r_v0=0.8)
        x = np.array([-3.0, -1.0, 2.0, 4.0])
        y = np.array([0.5, -1.0, 0.0, 2.0])
        wx, wy = desired_velocity(x, y, np.zeros(4), params)
        assert np.allclose(np.hypot(wx, wy), [1.34, 1.34, 0.8 * 1.34, 0.8 * 1.34])
        assert np.all(wx[:2] > 0) and np.all(wx[2:] < 0)
        assert wy[0] < 0 < wy[1]

    def test_no_steering_inside_the_door_band(self):
        params = PedParams(N_per_crowd=1)
        ex, ey = desired_direction(np.array([-1.0, 1.0]), np.array([0.1, -0.1]), params)
        assert np.array_equal(ey, [0.0, 0.0])
        assert np.array_equal(ex, [1.0, -1.0])

    def test_single_pedestrian_reaches_desired_speed(self):
        params = PedParams(N_per_crowd=1)
        system = PedestrianModel().system(params)
        u = integrate(system, pair_state([-8.0, 8.0], [0.0, 0.0]), 5 * params.relax_time, 0.01)
        speed = np.hypot(u[4:6], u[6:8])
        assert np.all(speed >= 0.99 * params.v0)
        assert np.all(speed <= params.v0 * (1 + 1e-9))

    def test_head_on_forces_are_opposite(self):
        params = PedParams(N_per_crowd=1)
        fx, fy = pedestrian_forces(np.array([-0.2, 0.2]), np.zeros(2), params)
        assert fx[0] == pytest.approx(-params.repulsion, rel=1e-12)
        assert fx[1] == pytest.approx(-fx[0], rel=1e-12)
        assert np.array_equal(fy, [0.0, 0.0])

    def test_body_force_on_overlap(self):
        params = PedParams(N_per_crowd=2)
        fx, _fy = pedestrian_forces(np.array([-5.15, -4.85, 10.0, 12.0]), np.zeros(4), params)
        expected = 25.0 * np.exp(0.1 / 0.08) + 1500.0 * 0.1
        assert fx[1] == pytest.approx(expected, rel=1e-12)
        assert fx[0] == pytest.approx(-expected, rel=1e-12)

    def test_wall_force_closed_form(self):
        params = PedParams(N_per_crowd=1)
        y = -params.height / 2 + 0.5
        _fx, fy = wall_forces(np.array([-10.0, 10.0]), np.array([y, -y]), params)
        expected = 25.0 * np.exp((0.2 - 0.5) / 0.08)
        assert fy[0] == pytest.approx(expected, rel=1e-9)
        assert fy[1] == pytest.approx(-expected, rel=1e-9)

    def test_passage_weights(self):
        params = PedParams(N_per_crowd=1)
        assert np.allclose(passage_weights(np.array([-1.0, 1.0]), params), [1.0, 1.0])
        assert np.allclose(passage_weights(np.array([0.3, -0.3]), params), np.exp(-1.0))

    def test_side_walls_push_inwards(self):
        params = PedParams(N_per_crowd=1)
        fx, fy = wall_forces(np.array([-10.0, 10.0]), np.array([-2.3, 2.3]), params)
        assert fy[0] > 0 > fy[1]
        assert np.allclose(fx, 0.0, atol=1e-12)

    def test_door_jamb_pushes_back(self):
        params = PedParams(N_per_crowd=1)
        fx, _fy = wall_forces(np.array([-0.4, 10.0]), np.array([1.0, 0.0]), params)
        assert fx[0] < 0

    def test_mirror_symmetry_of_dynamics(self, small_crowds, lifted):
        u = moving(lifted, small_crowds)
        assert np.allclose(
            sf_rhs(mirror(u, small_crowds), small_crowds),
            mirror(sf_rhs(u, small_crowds), small_crowds),
            atol=1e-10,
        )


class TestGivingWay:
    @pytest.fixture
    def params(self):
        return PedParams(N_per_crowd=1)

    def test_occupancy(self, params):
        occupancy = door_occupancy(np.array([0.0, 3.0]), np.zeros(2), params)
        assert occupancy[0] == pytest.approx(1.0 - np.exp(-4.0), rel=1e-3)
        assert occupancy[1] == pytest.approx(0.0, abs=1e-12)

    def test_patient_pedestrian_backs_off(self, params):
        wx, _wy = desired_velocity(np.array([0.0, 0.5]), np.zeros(2), np.zeros(2), params)
        assert wx[1] > 0

    def test_impatient_pedestrian_pushes_on(self, params):
        wx, _wy = desired_velocity(np.array([0.0, 0.5]), np.zeros(2), np.ones(2), params)
        assert wx[1] == pytest.approx(-params.nervous_factor * params.v0, rel=1e-3)

    def test_waiting_raises_impatience(self, params):
        rate = sf_rhs(pair_state([0.0, 0.5], [0.0, 0.0]), params)[8:]
        assert rate[1] == pytest.approx((1.0 - np.exp(-4.0)) / params.memory_time, rel=1e-3)
        assert abs(rate[0]) < 1e-2

    def test_impatience_fades_after_passing(self, params):
        rate = sf_rhs(pair_state([3.0, 0.5], [0.0, 0.0], (0.8, 0.0)), params)[8:]
        assert rate[0] == pytest.approx(-0.8 / params.memory_time, rel=1e-6)


class TestRestriction:
    def test_mirror_negates(self, small_crowds, lifted):
        u = moving(lifted, small_crowds)
        assert np.allclose(
            restrict_m(mirror(u, small_crowds), small_crowds),
            -restrict_m(u, small_crowds),
            atol=1e-12,
        )

    def test_rate_matches_finite_difference(self, small_crowds, lifted):
        u = moving(lifted, small_crowds)
        n = small_crowds.crowd_size
        h = 1e-6
        ahead = u.copy()
        ahead[: 2 * n] += h * u[2 * n : 4 * n]
        behind = u.copy()
        behind[: 2 * n] -= h * u[2 * n : 4 * n]
        numeric = (restrict_m(ahead, small_crowds)[0] - restrict_m(behind, small_crowds)[0]) / (
            2 * h
        )
        assert restrict_m(u, small_crowds)[1] == pytest.approx(numeric, rel=1e-5, abs=1e-8)

    def test_far_pedestrians_hardly_move_m(self, small_crowds, lifted):
        n = small_crowds.N_per_crowd
        far = lifted.copy()
        far[0], far[n] = -13.0, 13.0
        moved = far.copy()
        moved[0] -= 0.1
        moved[n] += 0.1
        change = restrict_m(moved, small_crowds)[0] - restrict_m(far, small_crowds)[0]
        assert abs(change) < 1e-6

    def test_crowds_far_from_door(self):
        params = PedParams(N_per_crowd=10, kappa_width=0.5)
        n = params.N_per_crowd
        x = np.concatenate((np.full(n, -8.0), np.full(n, 8.0))) + 0.3 * np.arange(2 * n)
        y = np.zeros(2 * n)
        u = np.concatenate((x, y, y, y, y))
        with pytest.raises(DegenerateConfigurationError):
            restrict_m(u, params)


class TestLifting:
    def test_hits_target(self, small_crowds, lifted):
        m, mdot = restrict_m(lifted, small_crowds)
        assert m == pytest.approx(0.3, abs=1e-6)
        assert mdot == 0.0

    def test_symmetric_at_zero(self, small_crowds):
        u = lift_linear([0.0, 0.0], default_density(small_crowds), small_crowds)
        assert restrict_m(u, small_crowds)[0] == pytest.approx(0.0, abs=1e-12)

    def test_crowds_stay_on_their_side(self, small_crowds, lifted):
        n = small_crowds.N_per_crowd
        x = lifted[: 2 * n]
        assert np.all(x[:n] < 0) and np.all(x[n:] > 0)

    def test_lifted_pedestrians_are_patient(self, small_crowds, lifted):
        assert np.array_equal(lifted[4 * small_crowds.crowd_size :], np.zeros(20))

    def test_deterministic(self, small_crowds, lifted):
        again = lift_linear([0.3, 0.0], default_density(small_crowds), small_crowds)
        assert np.array_equal(again, lifted)

    def test_moving_state_is_rejected(self, small_crowds):
        with pytest.raises(LiftingDomainError):
            lift_linear([0.3, 0.1], default_density(small_crowds), small_crowds)

    def test_unreachable_target(self, small_crowds):
        with pytest.raises(ModelDomainError):
            lift_linear([5.0, 0.0], default_density(small_crowds), small_crowds)

    def test_model_round_trip(self, small_crowds):
        ops = PedestrianModel(default_density(small_crowds)).operators(small_crowds)
        assert ops.restrict(ops.lift([-0.2, 0.0]))[0] == pytest.approx(-0.2, abs=1e-6)


class TestFittedLifting:
    @pytest.fixture
    def fits(self, monkeypatch):
        calls = []

        def fake_fit(ops, cfg, params, duration):
            calls.append((params, duration))
            line = DensityLine(a=-0.1, b=9.0, start=front_distance(params))
            return (line, line), 0.01

        monkeypatch.setattr(pedestrian, "fit_density", fake_fit)
        return calls

    def test_fit_point_snaps_to_grid(self):
        model = PedestrianModel(refit_step=0.2)
        point = model.fit_point(PedParams(w=0.62, r_v0=0.93))
        assert (point.w, point.r_v0) == (pytest.approx(0.6), pytest.approx(1.0))
        assert model.fit_point(PedParams(w=0.05)).w == pytest.approx(0.2)

    def test_one_fit_per_grid_point(self, fits, small_crowds):
        model = PedestrianModel(fit_duration=50.0)
        first = model.density(PedParams(N_per_crowd=10, w=0.62))
        again = model.density(PedParams(N_per_crowd=10, w=0.66))
        assert first is again
        model.density(PedParams(N_per_crowd=10, w=0.75))
        assert [params.w for params, _ in fits] == [pytest.approx(0.6), pytest.approx(0.8)]
        assert all(duration == 50.0 for _, duration in fits)

    def test_fitted_densities_lift(self, fits, small_crowds):
        ops = PedestrianModel().operators(small_crowds)
        assert ops.restrict(ops.lift([0.2, 0.0]))[0] == pytest.approx(0.2, abs=1e-6)
        assert len(fits) == 1

    def test_moving_state_is_rejected_before_fitting(self, fits, small_crowds):
        with pytest.raises(LiftingDomainError):
            PedestrianModel().lift([0.3, 0.1], small_crowds)
        assert not fits

    def test_fixed_densities_skip_fitting(self, fits, small_crowds):
        PedestrianModel(default_density(small_crowds)).lift([0.2, 0.0], small_crowds)
        assert not fits

    def test_invalid_step(self):
        with pytest.raises(ConfigError):
            PedestrianModel(refit_step=0.0)


class TestDensityLine:
    def test_uniform_quantile(self):
        line = DensityLine(a=0.0, b=8.0, start=1.3)
        assert line.quantile(4.0) == pytest.approx(1.8)
        assert line.extent(8) == pytest.approx(2.3)

    def test_quantile_inverts_cumulative(self):
        line = DensityLine(a=-0.5, b=8.0, start=1.3)
        for q in (0.5, 5.0, 20.0):
            assert line.cumulative(line.quantile(q)) == pytest.approx(q, rel=1e-10)

    def test_cannot_hold_crowd(self):
        with pytest.raises(ModelDomainError):
            DensityLine(a=-2.0, b=4.0, start=1.0).extent(10)

    def test_default_starts_at_clearance(self, small_crowds):
        assert default_density(small_crowds).start == pytest.approx(front_distance(small_crowds))
        assert front_distance(small_crowds) == pytest.approx(1.3)


class TestSnapshot:
    def test_dump_and_load(self, tmp_path, small_crowds, lifted):
        u = moving(lifted, small_crowds)
        path = tmp_path / "snapshot.txt"
        dump_snapshot(path, u, small_crowds, time=12.5)
        assert np.allclose(load_snapshot(path, small_crowds), u, rtol=1e-10, atol=1e-12)
        text = path.read_text(encoding="utf-8")
        assert "# t = 12.5" in text
        assert "crowd,id,x,y,vx,vy,impatience" in text
        assert text.count("blue,") == small_crowds.N_per_crowd

    def test_wrong_crowd_size(self, tmp_path, small_crowds, lifted):
        path = tmp_path / "snapshot.txt"
        dump_snapshot(path, lifted, small_crowds)
        with pytest.raises(ConfigError):
            load_snapshot(path, PedParams(N_per_crowd=5))

    def test_wrong_header(self, tmp_path, small_crowds):
        path = tmp_path / "snapshot.txt"
        path.write_text("crowd,id,x,y,vx,vy\nblue,0,1,2,3,4\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="header"):
            load_snapshot(path, small_crowds)

    def test_crowd_state_layout(self, small_crowds, lifted):
        state = CrowdState.from_vector(lifted, small_crowds)
        assert state.positions.shape == (small_crowds.crowd_size, 2)
        assert state.impatience.shape == (small_crowds.crowd_size,)
        assert np.array_equal(state.vector(), lifted)


@pytest.mark.slow
def test_crowds_stay_inside_the_corridor():
    params = PedParams(N_per_crowd=30)
    ops = PedestrianModel(default_density(params)).operators(params)
    _times, states = trajectory(ops.system, ops.lift([0.0, 0.0]), 100.0, 0.02, every=50)
    n = params.crowd_size
    assert np.all(np.isfinite(states))
    assert np.all(np.abs(states[:, n : 2 * n]) < params.height / 2)
    assert np.all((states[:, 4 * n :] >= 0.0) & (states[:, 4 * n :] <= 1.0))
    assert np.all(np.isfinite([restrict_m(u, params) for u in states]))


@pytest.mark.slow
def test_density_fit_matches_histogram():
    params = PedParams()
    model = PedestrianModel(default_density(params))
    (blue, red), error = fit_density(model.operators(params), model.default_eqfree(), params)
    assert error < 0.15
    for line in (blue, red):
        assert line.cumulative(line.extent(params.N_per_crowd)) == pytest.approx(100.0)


@pytest.mark.slow
class TestSmallCrowdOnset:
    THRESHOLD = 0.02

    @pytest.fixture(scope="class")
    def amplitude(self):
        family = ParameterFamily(PedestrianModel(fit_duration=200.0), PedParams(N_per_crowd=30))
        cfg = family.model.default_eqfree()
        cache = {}

        def at(w):
            if w not in cache:
                result = oscillation_amplitude(
                    family.at(w=w), cfg, [0.2, 0.0], t_max=200.0, threshold=self.THRESHOLD
                )
                cache[w] = result.amplitude
            return cache[w]

        return at

    def test_narrow_door_blocks(self, amplitude):
        assert amplitude(0.3) == 0.0

    def test_amplitude_grows_with_width(self, amplitude):
        assert 0.0 < amplitude(0.9) < amplitude(1.2)

    def test_onset_between_blocked_and_oscillating(self, amplitude):
        onset = scan_onset(lambda w: amplitude(w) - self.THRESHOLD, 0.3, 0.9, xtol=0.05)
        assert 0.3 < onset < 0.9
