import dataclasses
import math

import numpy as np
import pytest

from scipy import constants

from levsim.config import FrequencyConvention, SystemConfig, load_config
from levsim.dynamics import envelope, integrate_amplitudes
from levsim.errors import InsufficientData, NonFinite, OutOfRange
from levsim.langevin import (
    PhaseSpaceState,
    default_dt,
    ensemble_run,
    estimate_g2,
    initial_phase_space,
    langevin_step,
    noise_channels,
    simulate_trajectory,
    stationary_variance_em,
)

GAMMA = 0.5


def angular(**values):
    return SystemConfig(frequency_unit_convention=FrequencyConvention.ANGULAR, **values)


def thermal_config():
    """Two damped modes driven by unit heating noise, carriers 1 Hz and 1.3 Hz."""
    return load_config(
        {
            "omega_x": 1.0,
            "omega_y": 1.3,
            "gamma_gx": GAMMA,
            "gamma_gy": GAMMA,
            "D_tx": 1.0,
            "D_ty": 1.0,
        }
    )


def test_noise_channels():
    config = angular(
        omega_x=100.0,
        omega_y=130.0,
        gamma_gx=0.06,
        temperature=300.0,
        D_ty=4.0,
        gamma_cx=1e-4,
        Gamma_cx=1e-5,
    )
    channels = noise_channels(config)
    assert channels.sigma_T_x == pytest.approx(
        math.sqrt(2 * constants.k * 300.0 * 0.06 / (constants.hbar * 100.0))
    )
    assert channels.sigma_T_y == 0.0
    assert channels.sigma_Fa_y == 2.0
    assert channels.cooling_x == pytest.approx(12 * math.sqrt(1e-10 / 1e-4))
    assert channels.cooling_y == 0.0
    assert not channels.silent
    assert noise_channels(angular(omega_x=1.0, omega_y=2.0)).silent


def test_back_action_without_cooling_rate_is_rejected():
    with pytest.raises(OutOfRange) as info:
        noise_channels(angular(omega_x=1.0, omega_y=2.0, Gamma_cy=1e-5))
    assert info.value.field == "gamma_cy"


def test_initial_phase_space():
    config = angular(omega_x=1.0, omega_y=2.0, Q0=3.0, a_x0=0.5, a_y0=-1.0)
    assert initial_phase_space(config) == PhaseSpaceState(1.5, 0.0, -3.0, 0.0)


def test_free_step_is_an_exact_rotation():
    config = angular(omega_x=100.0, omega_y=130.0)
    dt = default_dt(config)
    state = PhaseSpaceState(1.0, 0.0, 0.0, 2.0)
    for _ in range(1000):
        state = langevin_step(state, config, dt, np.zeros(6))
    assert state.t == pytest.approx(1000 * dt)
    assert state.Q_x == pytest.approx(math.cos(100.0 * state.t), abs=1e-9)
    assert state.P_x == pytest.approx(-math.sin(100.0 * state.t), abs=1e-9)
    assert state.Q_y**2 + state.P_y**2 == pytest.approx(4.0, rel=1e-12)


def test_step_must_resolve_the_carrier():
    config = angular(omega_x=100.0, omega_y=130.0)
    limit = 2 * math.pi / (64 * 130.0)
    with pytest.raises(OutOfRange) as info:
        langevin_step(PhaseSpaceState(1, 0, 0, 0), config, 1.01 * limit, np.zeros(6))
    assert info.value.field == "dt"
    langevin_step(PhaseSpaceState(1, 0, 0, 0), config, limit, np.zeros(6))
    assert default_dt(config) == pytest.approx(limit / 2)


def test_noise_free_envelope_matches_amplitude_equations():
    config = angular(omega_x=100.0, omega_y=130.0, gamma_gx=1.0)
    assert noise_channels(config).silent
    series = simulate_trajectory(None, config, 3.0, record_stride=8)
    amplitude = np.hypot(series.quadrature("Q_x"), series.quadrature("P_x"))
    assert amplitude == pytest.approx(np.exp(-series.t), rel=0.02)

    trajectory = integrate_amplitudes(None, config, 3.0, 1e-3)
    reference = np.interp(series.t, trajectory.t, envelope(trajectory, "x"))
    assert amplitude == pytest.approx(reference, rel=0.02)


@pytest.mark.parametrize(["dt"], [(0.002,), (0.004,), (0.008,)])
def test_stationary_variance_of_the_scheme(dt):
    config = thermal_config()
    covariance = stationary_variance_em(config, dt)
    expected = 1.0 / (4 * GAMMA * (1 - GAMMA * dt))
    for index in range(4):
        assert covariance[index, index] == pytest.approx(expected, rel=1e-9)
    assert covariance[0, 1] == pytest.approx(0.0, abs=1e-9)
    assert covariance[0, 2] == pytest.approx(0.0, abs=1e-12)


def test_stationary_bias_is_first_order():
    config = thermal_config()
    steps = np.array([0.001, 0.002, 0.004, 0.008])
    exact = 1.0 / (4 * GAMMA)
    bias = [stationary_variance_em(config, dt)[1, 1] / exact - 1 for dt in steps]
    slope = np.polyfit(np.log(steps), np.log(bias), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.05)


def test_stationary_variance_needs_a_linear_damped_system():
    with pytest.raises(OutOfRange):
        stationary_variance_em(angular(omega_x=1.0, omega_y=2.0, gamma_gy=0.1))
    config = thermal_config()
    with pytest.raises(OutOfRange):
        stationary_variance_em(dataclasses.replace(config, delta=0.01))
    with pytest.raises(OutOfRange):
        stationary_variance_em(dataclasses.replace(config, gamma_cx=1e-3))


def test_same_seed_reproduces_the_ensemble():
    config = thermal_config()
    first = ensemble_run(config, 4, 1.0, master_seed=3)
    second = ensemble_run(config, 4, 1.0, master_seed=3)
    other = ensemble_run(config, 4, 1.0, master_seed=4)
    assert np.array_equal(first.quadratures, second.quadratures)
    assert not np.array_equal(first.quadratures, other.quadratures)


def test_ensemble_is_independent_of_blocks_and_threads():
    config = thermal_config()
    single = ensemble_run(config, 80, 0.5, master_seed=11, threads=1)
    several = ensemble_run(config, 80, 0.5, master_seed=11, threads=3)
    assert np.array_equal(single.quadratures, several.quadratures)
    # trajectory 70 lives in the second block
    series = simulate_trajectory(None, config, 0.5, seed=11, index=70)
    assert np.array_equal(series.samples, single.quadratures[70])


def test_record_stride():
    config = thermal_config()
    full = ensemble_run(config, 2, 1.0, master_seed=1)
    strided = ensemble_run(config, 2, 1.0, master_seed=1, record_stride=4)
    assert np.array_equal(strided.quadratures, full.quadratures[:, ::4])
    assert strided.record_dt == 4 * full.dt
    assert strided.seed_record["record_stride"] == 4
    with pytest.raises(OutOfRange):
        ensemble_run(config, 2, 1.0, record_stride=0)


def test_ensemble_needs_two_trajectories():
    with pytest.raises(InsufficientData):
        ensemble_run(thermal_config(), 1, 1.0)


def test_records_columns():
    config = thermal_config()
    ensemble = ensemble_run(config, 2, 0.1, master_seed=1)
    assert list(ensemble.records()) == [
        "t",
        "mean_Q_x",
        "mean_P_x",
        "mean_Q_y",
        "mean_P_y",
        "var_Q_x",
        "var_P_x",
        "var_Q_y",
        "var_P_y",
        "mean_I_x",
        "mean_I_y",
    ]
    series = simulate_trajectory(None, config, 0.1)
    assert list(series.records()) == ["t", "Q_x", "P_x", "Q_y", "P_y"]
    assert series.intensity("x").shape == (1, len(series.t))


def test_divergence_names_the_trajectory():
    config = angular(omega_x=100.0, omega_y=130.0, gamma_cx=1e3, a_x0=1e3)
    with pytest.raises(NonFinite) as info:
        simulate_trajectory(None, config, 1.0, index=5)
    assert info.value.trajectory == 5


@pytest.fixture(scope="module")
def thermal_ensemble():
    return ensemble_run(thermal_config(), 1000, 30.0, master_seed=7, record_stride=4)


def test_thermal_variance_reaches_the_stationary_value(thermal_ensemble):
    covariance = stationary_variance_em(thermal_config(), thermal_ensemble.dt)
    late = thermal_ensemble.t >= 10.0
    variance = thermal_ensemble.variance[late].mean(axis=0)
    assert variance == pytest.approx(np.diag(covariance), rel=0.05)


def test_thermal_g2(thermal_ensemble):
    tau = np.linspace(0.0, 3.0, 13)
    result = estimate_g2(thermal_ensemble, "x", tau)
    assert result.g2[0] == pytest.approx(2.0, abs=0.1)
    assert result.g2 == pytest.approx(1.0 + np.exp(-2 * GAMMA * tau), abs=0.1)
    assert np.all(result.stderr > 0)
    assert list(result.records()) == ["tau", "g2", "stderr"]


@pytest.mark.parametrize(["scale"], [(1.0,), (1 / math.sqrt(2),), (3.0,)])
def test_g2_does_not_depend_on_the_ladder_normalisation(thermal_ensemble, scale):
    tau = [0.0, 0.5, 1.0]
    reference = estimate_g2(thermal_ensemble, "y", tau)
    scaled = estimate_g2(thermal_ensemble, "y", tau, ladder_scale=scale)
    assert scaled.g2 == pytest.approx(reference.g2, rel=1e-9)


def test_lasing_g2_is_coherent():
    net_gain, cooling = 0.5, 1e-3
    config = load_config(
        {
            "omega_x": 3.0,
            "omega_y": 5.0,
            "gamma_gx": 0.2,
            "gamma_gy": 0.2,
            "gamma_ay": 0.2 + net_gain,
            "gamma_cy": cooling,
            "D_ty": 1.0,
            "a_x0": 0.0,
            "a_y0": math.sqrt(net_gain / (6 * cooling)),
        }
    )
    ensemble = ensemble_run(config, 50, 20.0, master_seed=2, record_stride=8)
    result = estimate_g2(ensemble, "y", [0.0, 0.5, 1.0])
    assert result.g2 == pytest.approx(1.0, abs=0.05)
    intensity = ensemble.intensity("y")[:, ensemble.t > 5.0].mean()
    assert intensity == pytest.approx(net_gain / (6 * cooling), rel=0.1)


def test_g2_argument_checks(thermal_ensemble):
    with pytest.raises(OutOfRange):
        estimate_g2(thermal_ensemble, "x", [-1.0])
    with pytest.raises(OutOfRange):
        estimate_g2(thermal_ensemble, "x", [0.0], warmup_frac=1.0)
    with pytest.raises(OutOfRange):
        estimate_g2(thermal_ensemble, "z", [0.0])
    with pytest.raises(InsufficientData):
        estimate_g2(thermal_ensemble, "x", [29.0])


def test_g2_of_an_empty_mode():
    config = angular(omega_x=100.0, omega_y=130.0, a_x0=0.0)
    ensemble = ensemble_run(config, 2, 0.1)
    with pytest.raises(InsufficientData):
        estimate_g2(ensemble, "x", [0.0])


def test_g2_reports_the_delays_it_used(thermal_ensemble):
    step = thermal_ensemble.record_dt
    result = estimate_g2(thermal_ensemble, "x", [0.0, 1.3 * step, 2.6 * step, 10 * step])
    assert result.tau == pytest.approx([0.0, step, 3 * step, 10 * step], rel=1e-12)
    exact = estimate_g2(thermal_ensemble, "x", [step, 3 * step])
    assert result.g2[1:3] == pytest.approx(exact.g2, rel=1e-12)


def test_cooling_noise_is_weighted_by_the_rotated_position():
    config = angular(omega_x=100.0, omega_y=130.0, gamma_cx=1e-4, Gamma_cx=1e-5)
    dt = default_dt(config)
    state = PhaseSpaceState(0.0, 1.0, 0.0, 0.0)
    quiet = langevin_step(state, config, dt, np.zeros(6))
    kicked = langevin_step(state, config, dt, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    # Q_x starts at zero; only the rotation gives the cooling channel weight
    q_rot = math.sin(100.0 * dt)
    expected = noise_channels(config).cooling_x * q_rot**2 * math.sqrt(dt)
    assert kicked.P_x - quiet.P_x == pytest.approx(expected, rel=1e-9)
    assert kicked.Q_x == quiet.Q_x
