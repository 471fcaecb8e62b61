"""
Mean-field dynamics in the frame rotating with each mode's carrier.

Amplitudes a_x, a_y follow the coupled linear-plus-cubic equations; the
phonon numbers N_x, N_y follow rate equations with an interference term fed
by the amplitudes. Both are integrated with a fixed-step classical RK4 on a
six-component real state ``[Re ax, Im ax, Re ay, Im ay, Nx, Ny]``.
"""

import logging
import math

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import check_mode, derive_parameters, mode_rates
from .context import settings
from .errors import NegativePopulation, OutOfRange, StepTooLarge

__all__ = [
    "ModeAmplitudeState",
    "PhononState",
    "Trajectory",
    "amplitude_rhs",
    "phonon_rhs",
    "integrate_amplitudes",
    "integrate_coupled",
    "reconstruct_position",
    "envelope",
    "coherent_fraction",
    "initial_state",
    "carrier_frequency",
]

logger = logging.getLogger(__name__)

INTENSITIES = ("phonon", "amplitude")
SAMPLES_PER_PERIOD = 32


@dataclass(frozen=True)
class ModeAmplitudeState:
    a_x: complex
    a_y: complex
    t: float = 0.0


@dataclass(frozen=True)
class PhononState:
    N_x: float
    N_y: float
    t: float = 0.0


@dataclass
class Trajectory:
    """Samples of an integration on a uniform time grid.

    ``N_x``/``N_y`` are only present for :func:`integrate_coupled` runs.
    ``clamp_count`` counts the steps where a phonon number went negative and
    was reset to zero.
    """

    t: np.ndarray
    a_x: np.ndarray
    a_y: np.ndarray
    dt: float
    Q0: float = 1.0
    N_x: Optional[np.ndarray] = None
    N_y: Optional[np.ndarray] = None
    clamp_count: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def has_phonons(self):
        return self.N_x is not None

    def amplitude(self, mode):
        return self.a_x if check_mode(mode) == "x" else self.a_y

    def phonons(self, mode):
        if not self.has_phonons:
            raise AttributeError("trajectory carries no phonon numbers")
        return self.N_x if check_mode(mode) == "x" else self.N_y

    def state(self, index):
        return ModeAmplitudeState(
            complex(self.a_x[index]), complex(self.a_y[index]), float(self.t[index])
        )

    @property
    def final(self):
        return self.state(-1)

    def records(self):
        columns = {
            "t": self.t,
            "re_ax": self.a_x.real,
            "im_ax": self.a_x.imag,
            "re_ay": self.a_y.real,
            "im_ay": self.a_y.imag,
        }
        if self.has_phonons:
            columns.update(Nx=self.N_x, Ny=self.N_y)
        return columns


def initial_state(config):
    """Initial amplitudes and phonon numbers as configured."""
    nx, ny = config.initial_phonons
    return ModeAmplitudeState(complex(config.a_x0), complex(config.a_y0)), PhononState(
        nx, ny
    )


def amplitude_rhs(state, params, config):
    """Time derivative (ȧx, ȧy) of the rotating-frame amplitudes."""
    ax, ay = state.a_x, state.a_y
    rx, ry = mode_rates(config, "x"), mode_rates(config, "y")
    gamma_x = 2.0 * (rx.gamma_g + 24.0 * rx.gamma_c * abs(ax) ** 2)
    gamma_y = 2.0 * (ry.gamma_g - ry.gamma_a + 24.0 * ry.gamma_c * abs(ay) ** 2)
    delta = params.Delta
    dax = complex(-gamma_x / 2.0, -delta / 2.0) * ax - 1j * params.beta_x * ay
    day = -1j * params.beta_y * ax + complex(-gamma_y / 2.0, delta / 2.0) * ay
    return dax, day


def phonon_rhs(phonons, amplitudes, config, params=None, intensity="phonon"):
    """Time derivative (Ṅx, Ṅy) of the mean phonon numbers.

    ``intensity`` picks what stands for the mode intensity inside the
    nonlinear damping: ``"phonon"`` uses N_j itself, ``"amplitude"`` uses
    |a_j|² of the accompanying amplitudes.
    """
    if intensity not in INTENSITIES:
        raise OutOfRange("intensity", f"expected one of {INTENSITIES}, got {intensity!r}")
    if params is None:
        params = derive_parameters(config)
    rx, ry = mode_rates(config, "x"), mode_rates(config, "y")
    nx, ny = phonons.N_x, phonons.N_y
    ax, ay = amplitudes.a_x, amplitudes.a_y
    if intensity == "phonon":
        ix, iy = nx, ny
    else:
        ix, iy = abs(ax) ** 2, abs(ay) ** 2
    gamma_x = 2.0 * (rx.gamma_g + 24.0 * rx.gamma_c * ix)
    gamma_y = 2.0 * (ry.gamma_g - ry.gamma_a + 24.0 * ry.gamma_c * iy)

    # iβ[a_y* a_x - a_x* a_y] = 2β Im(a_x* a_y)
    exchange = (ax.conjugate() * ay).imag
    dnx = -gamma_x * nx + (rx.D_t - 6.0 * rx.gamma_c) + 2.0 * params.beta_x * exchange
    dny = (
        -gamma_y * ny
        + (ry.gamma_a + ry.D_t - 6.0 * ry.gamma_c)
        - 2.0 * params.beta_y * exchange
    )
    return dnx, dny


def _check_step(t_end, dt):
    for name, value in (("t_end", t_end), ("dt", dt)):
        if not (math.isfinite(value) and value > 0):
            raise OutOfRange(name, "must be finite and > 0")
    return max(int(math.ceil(t_end / dt - 1e-9)), 1)


def _warn_coarse_step(params, config, dt):
    rx, ry = mode_rates(config, "x"), mode_rates(config, "y")
    fastest = max(
        abs(params.beta),
        abs(params.Gamma_x),
        abs(params.Gamma_y),
        abs(params.Delta),
        2.0 * (rx.gamma_g + ry.gamma_a),
    )
    if fastest and dt > 0.01 / fastest:
        logger.warning(
            "dt=%g exceeds 0.01/%g; RK4 results may not be converged", dt, fastest
        )


def _rk4(rhs, y0, dt, n_steps, clamp=None):
    """Classical fixed-step Runge-Kutta on a real vector.

    ``clamp`` is applied after each completed step and returns the number
    of components it reset.
    """
    out = np.empty((n_steps + 1, y0.size))
    out[0] = y = y0
    clamped = 0
    for step in range(1, n_steps + 1):
        t = (step - 1) * dt
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2, y + dt / 2 * k1)
        k3 = rhs(t + dt / 2, y + dt / 2 * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise StepTooLarge(step, step * dt)
        if clamp is not None:
            clamped += clamp(y)
        out[step] = y
    return out, clamped


def _clamp_phonons(y):
    negative = y[4:] < 0
    if negative.any():
        y[4:][negative] = 0.0
        return 1
    return 0


def _make_rhs(params, config, with_phonons, intensity):
    def rhs(t, y):
        amplitudes = ModeAmplitudeState(complex(y[0], y[1]), complex(y[2], y[3]), t)
        dax, day = amplitude_rhs(amplitudes, params, config)
        if not with_phonons:
            return np.array([dax.real, dax.imag, day.real, day.imag])
        dnx, dny = phonon_rhs(
            PhononState(y[4], y[5], t), amplitudes, config, params, intensity
        )
        return np.array([dax.real, dax.imag, day.real, day.imag, dnx, dny])

    return rhs


def integrate_amplitudes(initial, config, t_end, dt, params=None):
    """RK4 trajectory of the rotating-frame amplitudes.

    ``initial`` defaults to the configured ``a_x0``, ``a_y0``.
    """
    if params is None:
        params = derive_parameters(config)
    if initial is None:
        initial = initial_state(config)[0]
    n_steps = _check_step(t_end, dt)
    _warn_coarse_step(params, config, dt)
    y0 = np.array(
        [initial.a_x.real, initial.a_x.imag, initial.a_y.real, initial.a_y.imag],
        dtype=float,
    )
    logger.debug("integrating amplitudes: %d steps of %g s", n_steps, dt)
    out, _ = _rk4(_make_rhs(params, config, False, None), y0, dt, n_steps)
    return Trajectory(
        t=initial.t + dt * np.arange(n_steps + 1),
        a_x=out[:, 0] + 1j * out[:, 1],
        a_y=out[:, 2] + 1j * out[:, 3],
        dt=dt,
        Q0=config.Q0,
    )


def integrate_coupled(
    initial, phonons, config, t_end, dt, params=None, intensity="phonon"
):
    """Co-integrate amplitudes and phonon numbers as one 6-dimensional ODE.

    Phonon numbers that undershoot zero are reset to zero and counted. In
    strict mode any such reset raises :class:`NegativePopulation` once the
    run is complete.
    """
    if intensity not in INTENSITIES:
        raise OutOfRange("intensity", f"expected one of {INTENSITIES}, got {intensity!r}")
    if params is None:
        params = derive_parameters(config)
    default_amplitudes, default_phonons = initial_state(config)
    initial = default_amplitudes if initial is None else initial
    phonons = default_phonons if phonons is None else phonons
    if phonons.N_x < 0 or phonons.N_y < 0:
        raise OutOfRange("N0", "initial phonon numbers must be >= 0")
    n_steps = _check_step(t_end, dt)
    _warn_coarse_step(params, config, dt)

    y0 = np.array(
        [
            initial.a_x.real,
            initial.a_x.imag,
            initial.a_y.real,
            initial.a_y.imag,
            phonons.N_x,
            phonons.N_y,
        ],
        dtype=float,
    )
    logger.debug("integrating amplitudes and phonons: %d steps of %g s", n_steps, dt)
    out, clamped = _rk4(
        _make_rhs(params, config, True, intensity), y0, dt, n_steps, _clamp_phonons
    )
    if clamped:
        logger.warning("phonon number clamped at zero on %d step(s)", clamped)
        if settings.strict:
            raise NegativePopulation(clamped)
    return Trajectory(
        t=initial.t + dt * np.arange(n_steps + 1),
        a_x=out[:, 0] + 1j * out[:, 1],
        a_y=out[:, 2] + 1j * out[:, 3],
        dt=dt,
        Q0=config.Q0,
        N_x=out[:, 4],
        N_y=out[:, 5],
        clamp_count=clamped,
        meta={"intensity": intensity},
    )


def carrier_frequency(params, mode):
    """ω0 - ωr/2 for x, ω0 + ωr/2 for y."""
    sign = -1.0 if check_mode(mode) == "x" else 1.0
    return params.omega_0 + sign * params.omega_r / 2.0


def reconstruct_position(
    trajectory, params, mode, samples_per_period=SAMPLES_PER_PERIOD, window=None
):
    """Lab-frame coordinate Q_j(t) = Q0 Re{a_j(t) exp(iω_c t)}.

    Returns ``(t, Q)`` sampled ``samples_per_period`` times per carrier
    period, amplitudes linearly interpolated. ``window=(t0, t1)`` restricts
    the output to part of the trajectory.
    """
    if samples_per_period < 2:
        raise OutOfRange("samples_per_period", "must be >= 2")
    omega_c = carrier_frequency(params, mode)
    t0, t1 = trajectory.t[0], trajectory.t[-1]
    if window is not None:
        t0, t1 = max(window[0], t0), min(window[1], t1)
        if t1 <= t0:
            raise OutOfRange("window", "does not overlap the trajectory")
    if omega_c > 0:
        step = 2.0 * math.pi / (abs(omega_c) * samples_per_period)
    else:
        step = trajectory.dt
    t = t0 + step * np.arange(int(math.floor((t1 - t0) / step)) + 1)

    amplitude = trajectory.amplitude(mode)
    a = np.interp(t, trajectory.t, amplitude.real) + 1j * np.interp(
        t, trajectory.t, amplitude.imag
    )
    return t, trajectory.Q0 * np.real(a * np.exp(1j * omega_c * t))


def envelope(trajectory, mode):
    """Carrier envelope Q0·|a_j(t)| on the trajectory grid."""
    return trajectory.Q0 * np.abs(trajectory.amplitude(mode))


def coherent_fraction(trajectory):
    """|a_j|²/N_j per sample for both modes; NaN where N_j is zero."""
    if not trajectory.has_phonons:
        raise AttributeError("trajectory carries no phonon numbers")
    result = []
    for mode in ("x", "y"):
        intensity = np.abs(trajectory.amplitude(mode)) ** 2
        phonons = trajectory.phonons(mode)
        ratio = np.full_like(intensity, np.nan)
        np.divide(intensity, phonons, out=ratio, where=phonons > 0)
        result.append(ratio)
    return tuple(result)
