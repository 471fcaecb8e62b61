"""
Force sensing in the frequency domain.

The response of mode j carries two sidebands of the opposite mode v,
shifted by the modulation frequency ω_r::

    χ_j(ω) = (1 + A_v(ω) + B_v(ω)) / m((ω_j² - ω²) + iωΓ_j)
    A_v(ω) = (κδ/2m) / ((ω_v² - (ω - ω_r)²) + i(ω - ω_r)Γ_v)
    B_v(ω) = (κδ/2m) / ((ω_v² - (ω + ω_r)²) + i(ω + ω_r)Γ_v)

The shot-noise floor l_j²/(η²φ) of the position readout, referred back
through χ_j, gives the force imprecision S_s(ω) = l_j²/(η²φ)/|χ_j(ω)|².
"""

import logging
import math

from dataclasses import dataclass

import numpy as np

from scipy import constants, optimize, signal

from .config import check_mode, derive_parameters, mode_rates
from .errors import EmptyGrid, OutOfRange, PoleHit

__all__ = [
    "Susceptibility",
    "NoiseBudget",
    "ForcePSDCurve",
    "SensitivityMinimum",
    "effective_damping",
    "susceptibility",
    "noise_budget",
    "shot_noise_psd",
    "position_psd",
    "force_psd",
    "find_sensitivity_minima",
    "mean_phonons_from_trajectory",
    "shot_noise_floor",
]

logger = logging.getLogger(__name__)

POLE_GUARD = 1e-300
PATCH_POINTS = 257
PATCH_HALF_WIDTHS = 4.0
MIN_PROMINENCE = 1.5
REFINE_TOL = 1e-9
RECOMMENDED_POINTS = 10_000


@dataclass(frozen=True)
class Susceptibility:
    mode: str
    omega: np.ndarray
    chi: np.ndarray


@dataclass(frozen=True)
class NoiseBudget:
    """White force noise PSDs of one mode, N²/Hz."""

    S_T: float
    S_H: float
    S_C: float

    def __post_init__(self):
        for name in ("S_T", "S_H", "S_C"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise OutOfRange(name, "noise PSDs must be finite and >= 0")

    @property
    def white(self):
        return self.S_T + self.S_H + self.S_C


@dataclass(frozen=True)
class ForcePSDCurve:
    mode: str
    omega: np.ndarray
    budget: NoiseBudget
    S_s: np.ndarray
    S_s0: float

    COLUMNS = (
        "omega",
        "S_T",
        "S_H",
        "S_C",
        "S_s",
        "total",
        "sqrt_total",
        "S_s_over_S_s0",
    )

    @property
    def total(self):
        return self.budget.white + self.S_s

    @property
    def sqrt_total(self):
        return np.sqrt(self.total)

    @property
    def normalised_shot_noise(self):
        """S_s/S_s0."""
        return self.S_s / self.S_s0

    def records(self):
        ones = np.ones_like(self.omega)
        return {
            "omega": self.omega,
            "S_T": self.budget.S_T * ones,
            "S_H": self.budget.S_H * ones,
            "S_C": self.budget.S_C * ones,
            "S_s": self.S_s,
            "total": self.total,
            "sqrt_total": self.sqrt_total,
            "S_s_over_S_s0": self.normalised_shot_noise,
        }


@dataclass(frozen=True)
class SensitivityMinimum:
    omega: float
    sqrt_psd: float


def _other(mode):
    return "y" if check_mode(mode) == "x" else "x"


def _phonons(config, N_pair):
    pair = config.mean_phonons if N_pair is None else tuple(N_pair)
    if len(pair) != 2 or any(not (math.isfinite(n) and n >= 0) for n in pair):
        raise OutOfRange("N_pair", "mean phonon numbers must be finite and >= 0")
    return {"x": pair[0], "y": pair[1]}


def effective_damping(config, mode, N):
    """Γ_j = 2[γ_gj + 12γ_cj(2N_j + 1)]."""
    if not (math.isfinite(N) and N >= 0):
        raise OutOfRange("N", "mean phonon number must be finite and >= 0")
    rates = mode_rates(config, mode)
    return 2.0 * (rates.gamma_g + 12.0 * rates.gamma_c * (2.0 * N + 1.0))


def _frequencies(omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(~np.isfinite(omega)) or np.any(omega < 0):
        raise OutOfRange("omega", "frequencies must be finite and >= 0")
    return omega


def _guard(denominator, threshold, name, omega):
    small = np.abs(denominator) < threshold
    if np.any(small):
        where = np.argmax(np.atleast_1d(small))
        raise PoleHit(name, float(np.atleast_1d(omega)[where]))


def susceptibility(omega, config, mode, N_pair=None, params=None):
    params = derive_parameters(config) if params is None else params
    omega = _frequencies(omega)
    phonons = _phonons(config, N_pair)
    other = _other(mode)
    m = params.mass
    omega_j = mode_rates(config, mode).omega
    gamma_j = effective_damping(config, mode, phonons[mode])

    main = m * ((omega_j**2 - omega**2) + 1j * omega * gamma_j)
    _guard(main, POLE_GUARD * m * omega_j**2, "main", omega)
    numerator = np.ones_like(main)

    if config.delta:
        omega_v = mode_rates(config, other).omega
        gamma_v = effective_damping(config, other, phonons[other])
        strength = params.kappa * config.delta / (2.0 * m)
        threshold = POLE_GUARD * omega_v**2
        for name, shifted in (
            ("A", omega - params.omega_r),
            ("B", omega + params.omega_r),
        ):
            denominator = (omega_v**2 - shifted**2) + 1j * shifted * gamma_v
            _guard(denominator, threshold, name, omega)
            numerator = numerator + strength / denominator
    return Susceptibility(mode=mode, omega=omega, chi=numerator / main)


def noise_budget(config, mode, N=None, params=None):
    params = derive_parameters(config) if params is None else params
    if N is None:
        N = _phonons(config, None)[check_mode(mode)]
    rates = mode_rates(config, mode)
    m = params.mass
    if rates.gamma_c == 0:
        if rates.Gamma_c:
            raise OutOfRange(
                f"gamma_c{mode}", "back-action rate given without a cooling rate"
            )
        S_C = 0.0
    else:
        S_C = (
            36.0
            * constants.hbar
            * m
            * rates.omega
            * (rates.Gamma_c**2 / rates.gamma_c)
            * (4.0 * N * N + 4.0 * N + 1.0)
        )
    return NoiseBudget(
        S_T=2.0 * m * rates.gamma_g * constants.k * config.temperature,
        S_H=constants.hbar * m * rates.omega * rates.D_t,
        S_C=S_C,
    )


def shot_noise_floor(config, mode, params=None):
    """Flat position-readout floor l_j²/(η²φ)."""
    params = derive_parameters(config) if params is None else params
    return params.oscillator_length(mode) ** 2 / (config.eta**2 * config.phi)


def shot_noise_psd(omega, config, mode, N_pair=None, params=None, literal=False):
    """S_s(ω) = l_j²/(η²φ)/|χ_j(ω)|².

    With ``literal=True`` the form S_s0/|χ_j(ω/ω_j)|² is evaluated as
    written, feeding the dimensionless frequency into χ_j.
    """
    params = derive_parameters(config) if params is None else params
    omega = _frequencies(omega)
    if literal:
        scaled = omega / mode_rates(config, mode).omega
        chi = susceptibility(scaled, config, mode, N_pair, params).chi
        return params.shot_noise_scale(mode) / np.abs(chi) ** 2
    chi = susceptibility(omega, config, mode, N_pair, params).chi
    return shot_noise_floor(config, mode, params) / np.abs(chi) ** 2


def position_psd(omega, config, mode, N_pair=None, params=None):
    """|χ_j|²(S_T + S_H + S_C) + l_j²/(η²φ)."""
    params = derive_parameters(config) if params is None else params
    phonons = _phonons(config, N_pair)
    chi = susceptibility(omega, config, mode, N_pair, params).chi
    budget = noise_budget(config, mode, phonons[mode], params)
    return np.abs(chi) ** 2 * budget.white + shot_noise_floor(config, mode, params)


def force_psd(omega, config, mode, N_pair=None, params=None, literal=False):
    params = derive_parameters(config) if params is None else params
    omega = _frequencies(omega)
    phonons = _phonons(config, N_pair)
    return ForcePSDCurve(
        mode=mode,
        omega=omega,
        budget=noise_budget(config, mode, phonons[mode], params),
        S_s=shot_noise_psd(omega, config, mode, N_pair, params, literal),
        S_s0=params.shot_noise_scale(mode),
    )


def _feature_patches(config, mode, params, phonons):
    """Dense grids around the resonance and the sideband poles."""
    omega_j = mode_rates(config, mode).omega
    other = _other(mode)
    width = effective_damping(config, mode, phonons[mode])
    centres = [omega_j]
    if config.delta:
        omega_v = mode_rates(config, other).omega
        width += effective_damping(config, other, phonons[other])
        width += abs(params.kappa * config.delta / (2.0 * params.mass * omega_v))
        centres += [
            omega_v + params.omega_r,
            omega_v - params.omega_r,
            params.omega_r - omega_v,
        ]
    half = PATCH_HALF_WIDTHS * width
    return [
        np.linspace(centre - half, centre + half, PATCH_POINTS)
        for centre in centres
        if centre > 0
    ]


def _merge_within_features(minima, features):
    """Keep only the deepest minimum inside each feature patch.

    When a sideband pole falls on the resonance the dip splits into a
    doublet a few linewidths wide; both halves belong to one feature.
    """
    spans = [(patch[0], patch[-1]) for patch in features]
    deepest = {}
    for found in minima:
        key = next(
            (i for i, (lo, hi) in enumerate(spans) if lo <= found.omega <= hi),
            ("free", found.omega),
        )
        kept = deepest.get(key)
        if kept is None or found.sqrt_psd < kept.sqrt_psd:
            deepest[key] = found
    merged = sorted(deepest.values(), key=lambda found: found.omega)
    if len(merged) < len(minima):
        logger.debug("merged %d split minima", len(minima) - len(merged))
    return merged


def find_sensitivity_minima(
    config,
    mode,
    omega_grid,
    N_pair=None,
    params=None,
    min_prominence=MIN_PROMINENCE,
    literal=False,
):
    """Local minima of sqrt(force PSD) over ``omega_grid``, ascending in ω.

    The grid is augmented with dense patches around the resonance and the
    sideband features, minima less prominent than ``min_prominence``
    decades are dropped, and the survivors are refined by golden-section
    search. Minima sharing one feature patch collapse to the deepest.
    """
    params = derive_parameters(config) if params is None else params
    grid = _frequencies(omega_grid).ravel()
    if grid.size == 0:
        raise EmptyGrid("frequency grid is empty")
    if grid.size < RECOMMENDED_POINTS:
        logger.info("minima search on %d points; 1e4 or more recommended", grid.size)
    phonons = _phonons(config, N_pair)
    lo, hi = grid.min(), grid.max()
    features = _feature_patches(config, mode, params, phonons)
    patches = [patch[(patch >= lo) & (patch <= hi)] for patch in features]
    omega = np.unique(np.concatenate([grid] + patches))

    def log_sqrt_psd(w):
        curve = force_psd(np.atleast_1d(w), config, mode, N_pair, params, literal)
        return np.log10(curve.sqrt_total)

    values = log_sqrt_psd(omega)
    peaks, _ = signal.find_peaks(-values, prominence=min_prominence)

    minima = []
    for index in peaks:
        a, b, c = omega[index - 1], omega[index], omega[index + 1]
        best, best_value = b, values[index]
        try:
            result = optimize.minimize_scalar(
                lambda w: float(log_sqrt_psd(w)[0]),
                bracket=(a, b, c),
                method="golden",
                tol=REFINE_TOL,
            )
        except ValueError:
            logger.debug("golden refinement failed near %g; keeping grid point", b)
        else:
            if a <= result.x <= c and result.fun <= best_value:
                best, best_value = float(result.x), float(result.fun)
        minima.append(SensitivityMinimum(omega=float(best), sqrt_psd=10.0**best_value))
    minima = _merge_within_features(minima, features)
    logger.info(
        "mode %s: %d minima at %s",
        mode,
        len(minima),
        ", ".join(f"{m.omega:.6g}" for m in minima) or "-",
    )
    return minima


def mean_phonons_from_trajectory(trajectory, tail_frac=0.2):
    """Mean phonon numbers over the last ``tail_frac`` of a coupled run."""
    if not 0.0 < tail_frac <= 1.0:
        raise OutOfRange("tail_frac", "must lie in (0, 1]")
    start = int(len(trajectory) * (1.0 - tail_frac))
    return (
        float(np.mean(trajectory.phonons("x")[start:])),
        float(np.mean(trajectory.phonons("y")[start:])),
    )
