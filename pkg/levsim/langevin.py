"""
Stochastic integration of the quadrature-level Langevin equations.

Per mode j the lab-frame equations read::

    dQ_j = ω_j P_j dt
    dP_j = [-ω_j Q_j - 2(γ_j + 24 γ_cj Q_j²) P_j - c cos(ω_r t) Q_other] dt
           + σ_Tj dW_T + σ_Faj dW_Fa + C_j Q_j² dW_C

with γ_x = γ_gx, γ_y = γ_gy - γ_ay and c = δ(ω_y² - ω_x²)/(2 sqrt(ω_x ω_y)).

Each step first rotates (Q_j, P_j) exactly by ω_j·dt, then applies an
Euler-Maruyama kick to P_j evaluated on the rotated state at the start of
the step (Itô). Pure harmonic motion is therefore exact, and the kick
carries the damping, gain, cubic feedback, modulated coupling and the
three noise channels.
"""

import logging
import math

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from scipy import constants, linalg

from .config import check_mode, derive_parameters, mode_rates
from .errors import InsufficientData, NonFinite, OutOfRange
from .executor import parallel_map

__all__ = [
    "PhaseSpaceState",
    "NoiseChannels",
    "PhaseSpaceSeries",
    "EnsembleResult",
    "G2Result",
    "noise_channels",
    "default_dt",
    "langevin_step",
    "simulate_trajectory",
    "ensemble_run",
    "estimate_g2",
    "stationary_variance_em",
    "initial_phase_space",
]

logger = logging.getLogger(__name__)

# carrier samples per period: the ceiling accepted and the default
MIN_SAMPLES_PER_PERIOD = 64
DEFAULT_SAMPLES_PER_PERIOD = 128
NOISE_CHUNK = 1024
TRAJECTORY_BLOCK = 64
MAX_BATCHES = 20
QUADRATURES = ("Q_x", "P_x", "Q_y", "P_y")


@dataclass(frozen=True)
class PhaseSpaceState:
    Q_x: float
    P_x: float
    Q_y: float
    P_y: float
    t: float = 0.0

    def as_array(self):
        return np.array([self.Q_x, self.P_x, self.Q_y, self.P_y], dtype=float)

    @classmethod
    def from_array(cls, values, t=0.0):
        q_x, p_x, q_y, p_y = (float(v) for v in values)
        return cls(q_x, p_x, q_y, p_y, t)


@dataclass(frozen=True)
class NoiseChannels:
    """Noise amplitudes per mode.

    ``cooling_*`` multiplies Q_j² in the feedback back-action channel.
    """

    sigma_T_x: float
    sigma_T_y: float
    sigma_Fa_x: float
    sigma_Fa_y: float
    cooling_x: float
    cooling_y: float

    def __post_init__(self):
        for name, value in vars(self).items():
            if not (math.isfinite(value) and value >= 0):
                raise OutOfRange(name, "noise amplitudes must be finite and >= 0")

    @property
    def silent(self):
        return not any(vars(self).values())


def _cooling_prefactor(rates, mode):
    if rates.gamma_c == 0:
        if rates.Gamma_c == 0:
            return 0.0
        raise OutOfRange(
            f"gamma_c{mode}", "back-action rate given without a cooling rate"
        )
    return 12.0 * math.sqrt(rates.Gamma_c**2 / rates.gamma_c)


def noise_channels(config):
    values = {}
    for mode in ("x", "y"):
        rates = mode_rates(config, mode)
        values[f"sigma_T_{mode}"] = math.sqrt(
            2.0
            * constants.k
            * config.temperature
            * rates.gamma_g
            / (constants.hbar * rates.omega)
        )
        values[f"sigma_Fa_{mode}"] = math.sqrt(rates.D_t)
        values[f"cooling_{mode}"] = _cooling_prefactor(rates, mode)
    return NoiseChannels(**values)


def default_dt(config):
    return 2.0 * math.pi / (DEFAULT_SAMPLES_PER_PERIOD * max(config.omega_x, config.omega_y))


def _check_dt(config, dt):
    if dt is None:
        return default_dt(config)
    limit = 2.0 * math.pi / (MIN_SAMPLES_PER_PERIOD * max(config.omega_x, config.omega_y))
    if not (math.isfinite(dt) and 0 < dt <= limit):
        raise OutOfRange("dt", f"must lie in (0, {limit!r}] to resolve the carrier")
    return dt


def initial_phase_space(config):
    """Lab-frame quadratures matching the configured rotating-frame amplitudes
    at t = 0 (Q = Q0 Re a, P = -Q0 Im a)."""
    ax, ay = complex(config.a_x0), complex(config.a_y0)
    return PhaseSpaceState(
        config.Q0 * ax.real,
        -config.Q0 * ax.imag,
        config.Q0 * ay.real,
        -config.Q0 * ay.imag,
    )


@dataclass(frozen=True)
class _Kernel:
    """Step coefficients for both modes, precomputed once per run."""

    dt: float
    sqrt_dt: float
    cos: np.ndarray
    sin: np.ndarray
    damping: np.ndarray
    cubic: np.ndarray
    coupling: float
    omega_r: float
    thermal: np.ndarray
    heating: np.ndarray
    cooling: np.ndarray

    @classmethod
    def build(cls, config, dt, params=None, channels=None):
        params = derive_parameters(config) if params is None else params
        channels = noise_channels(config) if channels is None else channels
        rx, ry = mode_rates(config, "x"), mode_rates(config, "y")
        omega = np.array([rx.omega, ry.omega])
        return cls(
            dt=dt,
            sqrt_dt=math.sqrt(dt),
            cos=np.cos(omega * dt),
            sin=np.sin(omega * dt),
            damping=np.array([rx.gamma_g, ry.gamma_g - ry.gamma_a]),
            cubic=24.0 * np.array([rx.gamma_c, ry.gamma_c]),
            coupling=config.delta
            * (ry.omega**2 - rx.omega**2)
            / (2.0 * math.sqrt(rx.omega * ry.omega)),
            omega_r=params.omega_r,
            thermal=np.array([channels.sigma_T_x, channels.sigma_T_y]),
            heating=np.array([channels.sigma_Fa_x, channels.sigma_Fa_y]),
            cooling=np.array([channels.cooling_x, channels.cooling_y]),
        )

    def step(self, qp, t, xi):
        """Advance states ``qp`` (n, 4) from time ``t`` with normals ``xi`` (n, 6).

        The free rotation is exact; the kick that follows evaluates drift and
        the Q²-weighted cooling noise at the rotated state. The kick leaves Q
        unchanged, so that is its left point in the Itô sense.
        """
        q, p = qp[:, 0::2], qp[:, 1::2]
        q_rot = q * self.cos + p * self.sin
        p_rot = p * self.cos - q * self.sin
        q_sq = q_rot * q_rot
        drift = -2.0 * (self.damping + self.cubic * q_sq) * p_rot
        if self.coupling:
            drift = drift - self.coupling * math.cos(self.omega_r * t) * q_rot[:, ::-1]
        # xi columns: (T, Fa, C) for x, then for y
        noise = (
            self.thermal * xi[:, 0::3]
            + self.heating * xi[:, 1::3]
            + self.cooling * q_sq * xi[:, 2::3]
        )
        out = np.empty_like(qp)
        out[:, 0::2] = q_rot
        out[:, 1::2] = p_rot + drift * self.dt + noise * self.sqrt_dt
        return out


def langevin_step(state, config, dt, noise, params=None, channels=None):
    """One step from ``state``; ``noise`` holds six standard normals,
    (thermal, heating, cooling) for x followed by the same for y."""
    dt = _check_dt(config, dt)
    xi = np.asarray(noise, dtype=float).reshape(1, 6)
    kernel = _Kernel.build(config, dt, params, channels)
    out = kernel.step(state.as_array().reshape(1, 4), state.t, xi)
    if not np.all(np.isfinite(out)):
        raise NonFinite(1)
    return PhaseSpaceState.from_array(out[0], state.t + dt)


def _stream(master_seed, index):
    """Independent normal stream of trajectory ``index``."""
    sequence = np.random.SeedSequence(master_seed, spawn_key=(int(index),))
    return np.random.default_rng(sequence)


def _integrate_block(indices, initial, kernel, n_steps, stride, master_seed, t0):
    """Integrate trajectories ``indices`` together, recording every ``stride`` steps."""
    n = len(indices)
    streams = [_stream(master_seed, index) for index in indices]
    qp = np.tile(initial.as_array(), (n, 1))
    n_rec = n_steps // stride + 1
    record = np.empty((n, n_rec, 4))
    record[:, 0] = qp

    step = 0
    while step < n_steps:
        chunk = min(NOISE_CHUNK, n_steps - step)
        xi = np.stack([stream.standard_normal((chunk, 6)) for stream in streams], axis=1)
        for k in range(chunk):
            t = t0 + step * kernel.dt
            qp = kernel.step(qp, t, xi[k])
            step += 1
            finite = np.isfinite(qp).all(axis=1)
            if not finite.all():
                raise NonFinite(step, int(indices[int(np.argmin(finite))]))
            if step % stride == 0:
                record[:, step // stride] = qp
    return record


def _check_run(config, t_end, dt, record_stride):
    dt = _check_dt(config, dt)
    if not (math.isfinite(t_end) and t_end > 0):
        raise OutOfRange("t_end", "must be finite and > 0")
    if int(record_stride) != record_stride or record_stride < 1:
        raise OutOfRange("record_stride", "must be a positive integer")
    n_steps = max(int(math.ceil(t_end / dt - 1e-9)), 1)
    return dt, n_steps, int(record_stride)


@dataclass
class PhaseSpaceSeries:
    """One Langevin trajectory sampled every ``stride`` integration steps."""

    t: np.ndarray
    samples: np.ndarray
    dt: float
    stride: int
    seed: int
    index: int = 0

    def quadrature(self, name):
        return self.samples[:, QUADRATURES.index(name)]

    @property
    def record_dt(self):
        return self.dt * self.stride

    def intensity(self, mode, ladder_scale=1.0):
        """|ladder_scale·(Q + iP)|² with shape (1, n_samples)."""
        offset = 0 if check_mode(mode) == "x" else 2
        q, p = self.samples[:, offset], self.samples[:, offset + 1]
        return (ladder_scale**2 * (q * q + p * p))[np.newaxis, :]

    def records(self):
        columns = {"t": self.t}
        columns.update(zip(QUADRATURES, self.samples.T))
        return columns


def simulate_trajectory(
    initial, config, t_end, dt=None, seed=0, index=0, record_stride=1, params=None
):
    """Single trajectory with the noise stream of ensemble member ``index``.

    For the same ``(seed, index)`` the series is bit-identical to row
    ``index`` of :func:`ensemble_run`.
    """
    dt, n_steps, stride = _check_run(config, t_end, dt, record_stride)
    initial = initial_phase_space(config) if initial is None else initial
    kernel = _Kernel.build(config, dt, params)
    record = _integrate_block([index], initial, kernel, n_steps, stride, seed, initial.t)
    return PhaseSpaceSeries(
        t=initial.t + dt * stride * np.arange(record.shape[1]),
        samples=record[0],
        dt=dt,
        stride=stride,
        seed=seed,
        index=index,
    )


@dataclass
class EnsembleResult:
    """Recorded quadratures of ``n_traj`` trajectories, shape (n_traj, n_t, 4).

    ``master_seed``, ``dt``, ``stride`` and the run length reproduce the
    ensemble bit-exactly.
    """

    t: np.ndarray
    quadratures: np.ndarray
    dt: float
    stride: int
    master_seed: int
    meta: dict = field(default_factory=dict)

    @property
    def n_traj(self):
        return self.quadratures.shape[0]

    @property
    def record_dt(self):
        return self.dt * self.stride

    @cached_property
    def mean(self):
        return self.quadratures.mean(axis=0)

    @cached_property
    def variance(self):
        return self.quadratures.var(axis=0)

    def intensity(self, mode, ladder_scale=1.0):
        """|ladder_scale·(Q_j + iP_j)|² per trajectory and sample."""
        offset = 0 if check_mode(mode) == "x" else 2
        q = self.quadratures[:, :, offset]
        p = self.quadratures[:, :, offset + 1]
        return ladder_scale**2 * (q * q + p * p)

    @property
    def seed_record(self):
        return {
            "master_seed": self.master_seed,
            "n_traj": self.n_traj,
            "dt": self.dt,
            "record_stride": self.stride,
            "t_end": float(self.t[-1] - self.t[0]),
        }

    def records(self):
        columns = {"t": self.t}
        for column, name in enumerate(QUADRATURES):
            columns[f"mean_{name}"] = self.mean[:, column]
        for column, name in enumerate(QUADRATURES):
            columns[f"var_{name}"] = self.variance[:, column]
        columns["mean_I_x"] = self.intensity("x").mean(axis=0)
        columns["mean_I_y"] = self.intensity("y").mean(axis=0)
        return columns


def ensemble_run(
    config,
    n_traj,
    t_end,
    dt=None,
    master_seed=0,
    initial=None,
    record_stride=1,
    threads=None,
):
    """Run ``n_traj`` independent trajectories.

    Trajectory ``i`` draws its noise from ``SeedSequence(master_seed,
    spawn_key=(i,))``, so results do not depend on how trajectories are
    grouped into blocks or spread over threads.
    """
    if int(n_traj) != n_traj or n_traj < 2:
        raise InsufficientData("an ensemble needs at least 2 trajectories")
    dt, n_steps, stride = _check_run(config, t_end, dt, record_stride)
    initial = initial_phase_space(config) if initial is None else initial
    kernel = _Kernel.build(config, dt)

    blocks = [
        range(start, min(start + TRAJECTORY_BLOCK, n_traj))
        for start in range(0, n_traj, TRAJECTORY_BLOCK)
    ]

    def run(block):
        record = _integrate_block(
            block, initial, kernel, n_steps, stride, master_seed, initial.t
        )
        logger.debug("trajectories %d..%d done", block.start, block.stop - 1)
        return record

    logger.info(
        "ensemble: %d trajectories, %d steps of %g s, seed %d",
        n_traj,
        n_steps,
        dt,
        master_seed,
    )
    quadratures = np.concatenate(parallel_map(run, blocks, threads), axis=0)
    return EnsembleResult(
        t=initial.t + dt * stride * np.arange(quadratures.shape[1]),
        quadratures=quadratures,
        dt=dt,
        stride=stride,
        master_seed=master_seed,
    )


@dataclass
class G2Result:
    tau: np.ndarray
    g2: np.ndarray
    stderr: np.ndarray
    mode: str

    def records(self):
        return {"tau": self.tau, "g2": self.g2, "stderr": self.stderr}


def _g2_curve(intensity, lags):
    """Joint ensemble/time estimate of ⟨I(t)I(t+τ)⟩/⟨I⟩² for each lag."""
    mean = intensity.mean()
    if mean == 0:
        raise InsufficientData("mean intensity is zero in the averaging window")
    n = intensity.shape[1]
    return np.array(
        [np.mean(intensity[:, : n - lag] * intensity[:, lag:]) for lag in lags]
    ) / (mean * mean)


def estimate_g2(ensemble, mode, tau_grid, warmup_frac=0.2, ladder_scale=0.5):
    """Second-order coherence g²(τ) of mode ``mode``.

    The first ``warmup_frac`` of the record is discarded. Standard errors
    come from batch means over groups of trajectories (NaN for a single
    trajectory). ``ladder_scale`` normalises the ladder operator
    a = ladder_scale·(Q + iP) and cancels in the ratio. Delays are rounded to
    whole record steps and ``tau`` of the result holds the rounded values.
    """
    check_mode(mode)
    if not 0.0 <= warmup_frac < 1.0:
        raise OutOfRange("warmup_frac", "must lie in [0, 1)")
    tau = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    if tau.size == 0 or np.any(tau < 0) or not np.all(np.isfinite(tau)):
        raise OutOfRange("tau_grid", "delays must be finite and >= 0")

    intensity = ensemble.intensity(mode, ladder_scale)
    start = int(math.ceil(warmup_frac * intensity.shape[1]))
    window = intensity[:, start:]
    lags = np.rint(tau / ensemble.record_dt).astype(int)
    used = lags * ensemble.record_dt
    if not np.allclose(used, tau, rtol=1e-9, atol=0.0):
        logger.debug("delays rounded to multiples of %r", ensemble.record_dt)
    if window.shape[1] == 0 or lags.max() >= window.shape[1]:
        raise InsufficientData(
            f"averaging window of {window.shape[1]} samples is shorter than"
            f" the largest delay ({int(lags.max())} samples)"
        )

    g2 = _g2_curve(window, lags)
    n_batches = min(MAX_BATCHES, window.shape[0])
    if n_batches >= 2:
        batches = np.array(
            [
                _g2_curve(window[rows], lags)
                for rows in np.array_split(np.arange(window.shape[0]), n_batches)
            ]
        )
        stderr = batches.std(axis=0, ddof=1) / math.sqrt(n_batches)
    else:
        stderr = np.full_like(g2, np.nan)

    zero = lags == 0
    if zero.any() and g2[zero].min() < 1.0 - 1e-9:
        logger.warning("g2(0) = %r below 1 violates Cauchy-Schwarz", g2[zero].min())
    return G2Result(tau=used, g2=g2, stderr=stderr, mode=mode)


def stationary_variance_em(config, dt=None, params=None):
    """Exact stationary covariance of the discrete scheme, linear case.

    The one-step map is linear when cubic feedback and coupling are off;
    its fixed-point covariance solves the discrete Lyapunov equation.
    Returns a 4x4 matrix ordered (Q_x, P_x, Q_y, P_y).
    """
    if config.delta != 0:
        raise OutOfRange("delta", "stationary covariance needs uncoupled modes")
    if config.gamma_cx or config.gamma_cy:
        raise OutOfRange("gamma_c", "stationary covariance needs the linear case")
    dt = _check_dt(config, dt)
    kernel = _Kernel.build(config, dt, params)

    zero = np.zeros((4, 6))
    transition = kernel.step(np.eye(4), 0.0, zero).T
    undamped = kernel.damping <= 0
    if undamped.any() or np.max(np.abs(np.linalg.eigvals(transition))) >= 1.0:
        name = "gamma_gx" if undamped[0] else "gamma_ay"
        raise OutOfRange(name, "a mode is not damped; no stationary state")
    diffusion = dt * np.diag(
        [0.0, kernel.thermal[0] ** 2 + kernel.heating[0] ** 2]
        + [0.0, kernel.thermal[1] ** 2 + kernel.heating[1] ** 2]
    )
    return linalg.solve_discrete_lyapunov(transition, diffusion)
