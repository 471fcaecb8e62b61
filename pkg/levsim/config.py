"""
Physical parameters, unit conventions and derived symbols.

Everything the solvers consume is computed once by :func:`derive_parameters`
and carried in a :class:`DerivedParams`; solvers never recompute composite
symbols themselves. All stored frequencies and rates are angular (rad/s).
"""

import dataclasses
import enum
import json
import logging
import math
import os

from collections.abc import Mapping
from dataclasses import dataclass
from typing import NamedTuple, Optional

from scipy import constants

from .errors import ConfigError, DegenerateTrap, MissingKey, OutOfRange, ParseError

__all__ = [
    "FrequencyConvention",
    "SystemConfig",
    "DerivedParams",
    "ModeRates",
    "load_config",
    "config_from_mapping",
    "mass_from_geometry",
    "derive_parameters",
    "mode_rates",
    "check_mode",
]

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# keys a document may carry that are not SystemConfig fields
METADATA_KEYS = frozenset({"description", "assumed", "run"})

REQUIRED_KEYS = ("omega_x", "omega_y")

# fields scaled by frequency_unit_convention / rate_unit_convention
FREQUENCY_FIELDS = ("omega_x", "omega_y", "omega_r", "Delta_detuning")
RATE_FIELDS = (
    "gamma_gx",
    "gamma_gy",
    "gamma_ay",
    "gamma_cx",
    "gamma_cy",
    "Gamma_cx",
    "Gamma_cy",
    "D_tx",
    "D_ty",
)


class FrequencyConvention(str, enum.Enum):
    ANGULAR = "angular"
    ORDINARY = "ordinary"

    @property
    def factor(self):
        return TWO_PI if self is FrequencyConvention.ORDINARY else 1.0


@dataclass(frozen=True)
class SystemConfig:
    """User-facing parameters, already converted to rad/s.

    The convention fields record how the numbers were read; they are never
    re-applied, so :func:`dataclasses.replace` on a loaded config is safe.
    """

    omega_x: float
    omega_y: float
    gamma_gx: float = 0.0
    gamma_gy: float = 0.0
    gamma_ay: float = 0.0
    gamma_cx: float = 0.0
    gamma_cy: float = 0.0
    Gamma_cx: float = 0.0
    Gamma_cy: float = 0.0
    D_tx: float = 0.0
    D_ty: float = 0.0
    delta: float = 0.0
    omega_r: Optional[float] = None
    Delta_detuning: Optional[float] = None
    temperature: float = 0.0
    diameter: float = 100e-9
    density: float = 2200.0
    eta: float = 2e-9
    phi: float = 5e16
    Q0: float = 1.0
    N0: float = 0.0
    frequency_unit_convention: FrequencyConvention = FrequencyConvention.ORDINARY
    rate_unit_convention: FrequencyConvention = FrequencyConvention.ANGULAR
    a_x0: float = 1.0
    a_y0: float = 0.0
    N_x0: Optional[float] = None
    N_y0: Optional[float] = None
    N_x_mean: float = 0.0
    N_y_mean: float = 0.0
    symmetric_modes: bool = False

    def __post_init__(self):
        for name in ("omega_x", "omega_y", "diameter", "density", "eta", "phi", "Q0"):
            _check_finite(name, getattr(self, name))
            if getattr(self, name) <= 0:
                raise OutOfRange(name, "must be > 0")
        for name in RATE_FIELDS + ("temperature", "N0", "N_x_mean", "N_y_mean"):
            _check_finite(name, getattr(self, name))
            if getattr(self, name) < 0:
                raise OutOfRange(name, "must be >= 0")
        for name in ("omega_r", "N_x0", "N_y0"):
            value = getattr(self, name)
            if value is not None:
                _check_finite(name, value)
                if value < 0:
                    raise OutOfRange(name, "must be >= 0")
        for name in ("Delta_detuning", "a_x0", "a_y0"):
            if getattr(self, name) is not None:
                _check_finite(name, getattr(self, name))
        _check_finite("delta", self.delta)
        if not 0.0 <= self.delta <= 0.1:
            raise OutOfRange("delta", "must lie in [0, 0.1] (small-angle regime)")

    @property
    def initial_phonons(self):
        nx = self.N0 if self.N_x0 is None else self.N_x0
        ny = self.N0 if self.N_y0 is None else self.N_y0
        return nx, ny

    @property
    def mean_phonons(self):
        return self.N_x_mean, self.N_y_mean

    def to_document(self):
        """Snapshot that :func:`config_from_mapping` reloads bit-identically."""
        doc = {}
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if isinstance(value, FrequencyConvention):
                value = FrequencyConvention.ANGULAR.value
            if value is not None:
                doc[field.name] = value
        return doc


@dataclass(frozen=True)
class DerivedParams:
    mass: float
    omega_0: float
    omega_1: float
    omega_3: float
    omega_r: float
    beta_x: float
    beta_y: float
    beta: float
    kappa: float
    Delta: float
    Gamma_bal: float
    Gamma_x: float
    Gamma_y: float
    l_x: float
    l_y: float
    S_s0_x: float
    S_s0_y: float

    def oscillator_length(self, mode):
        return self.l_x if check_mode(mode) == "x" else self.l_y

    def shot_noise_scale(self, mode):
        return self.S_s0_x if check_mode(mode) == "x" else self.S_s0_y


class ModeRates(NamedTuple):
    omega: float
    gamma_g: float
    gamma_a: float
    gamma_c: float
    Gamma_c: float
    D_t: float


def _check_finite(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{name}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise OutOfRange(name, "must be finite")


def check_mode(mode):
    if mode not in ("x", "y"):
        raise OutOfRange("mode", f"expected 'x' or 'y', got {mode!r}")
    return mode


def _convention(doc, key, default):
    raw = doc.get(key, default)
    try:
        return FrequencyConvention(raw)
    except ValueError:
        raise ParseError(f"{key}: expected 'angular' or 'ordinary', got {raw!r}")


def config_from_mapping(doc):
    """Build a validated :class:`SystemConfig` from a parsed document."""
    if not isinstance(doc, Mapping):
        raise ParseError("config document must be a JSON object")
    field_names = {field.name for field in dataclasses.fields(SystemConfig)}
    unknown = sorted(set(doc) - field_names - METADATA_KEYS)
    if unknown:
        raise ParseError(f"unknown config key(s): {', '.join(unknown)}")
    for key in REQUIRED_KEYS:
        if key not in doc:
            raise MissingKey(key)

    freq = _convention(doc, "frequency_unit_convention", FrequencyConvention.ORDINARY)
    rate = _convention(doc, "rate_unit_convention", FrequencyConvention.ANGULAR)

    values = {}
    for key, value in doc.items():
        if key in METADATA_KEYS or key.endswith("_unit_convention"):
            continue
        if key == "symmetric_modes":
            if not isinstance(value, bool):
                raise ParseError(f"symmetric_modes: expected true/false, got {value!r}")
        elif value is not None:
            _check_finite(key, value)
            if key in FREQUENCY_FIELDS:
                value = value * freq.factor
            elif key in RATE_FIELDS:
                value = value * rate.factor
        values[key] = value
    return SystemConfig(
        frequency_unit_convention=freq, rate_unit_convention=rate, **values
    )


def load_config(source):
    """Load a config from a JSON file path or an already parsed mapping."""
    if isinstance(source, Mapping):
        return config_from_mapping(source)
    path = os.fspath(source)
    try:
        with open(path, encoding="utf-8") as stream:
            doc = json.load(stream)
    except (json.JSONDecodeError, UnicodeDecodeError) as error:
        raise ParseError(f"{path}: {error}") from error
    except OSError as error:
        raise ConfigError(f"{path}: {error.strerror or error}") from error
    config = config_from_mapping(doc)
    logger.info(
        "loaded %s (frequencies %s, rates %s)",
        path,
        config.frequency_unit_convention.value,
        config.rate_unit_convention.value,
    )
    return config


def mass_from_geometry(diameter, density):
    """Mass of a homogeneous sphere, kg."""
    if not diameter > 0:
        raise OutOfRange("diameter", "must be > 0")
    if not density > 0:
        raise OutOfRange("density", "must be > 0")
    return density * math.pi * diameter**3 / 6.0


def derive_parameters(config):
    wx, wy, delta = config.omega_x, config.omega_y, config.delta
    if wx == wy and delta != 0:
        raise DegenerateTrap(
            "omega_x == omega_y: coupling is undefined without trap asymmetry"
        )
    mass = mass_from_geometry(config.diameter, config.density)
    omega_0 = math.sqrt(wx**2 + wy**2) / 2.0
    omega_1 = (wy**2 - wx**2) / (2.0 * omega_0)
    omega_3 = delta * omega_1
    beta_x = omega_3 * math.sqrt(wx / wy)
    beta_y = omega_3 * math.sqrt(wy / wx)

    if config.omega_r is not None:
        omega_r = config.omega_r
    elif config.Delta_detuning is not None:
        omega_r = omega_1 - config.Delta_detuning
    else:
        omega_r = omega_1
    if config.Delta_detuning is not None:
        Delta = config.Delta_detuning
    else:
        Delta = omega_1 - omega_r

    gamma_y = config.gamma_gy - config.gamma_ay
    l_x = math.sqrt(constants.hbar / (2.0 * mass * wx))
    l_y = math.sqrt(constants.hbar / (2.0 * mass * wy))
    readout = config.eta**2 * config.phi
    return DerivedParams(
        mass=mass,
        omega_0=omega_0,
        omega_1=omega_1,
        omega_3=omega_3,
        omega_r=omega_r,
        beta_x=beta_x,
        beta_y=beta_y,
        beta=math.sqrt(beta_x * beta_y),
        kappa=mass * (wy**2 - wx**2) / 2.0,
        Delta=Delta,
        Gamma_bal=config.gamma_gx + gamma_y,
        Gamma_x=2.0 * config.gamma_gx,
        Gamma_y=2.0 * gamma_y,
        l_x=l_x,
        l_y=l_y,
        S_s0_x=mass**2 * l_x**2 * wx**4 / readout,
        S_s0_y=mass**2 * l_y**2 * wy**4 / readout,
    )


def mode_rates(config, mode):
    """Per-mode rates; with ``symmetric_modes`` the y mode reuses the x values
    of gas damping and momentum diffusion."""
    if check_mode(mode) == "x":
        return ModeRates(
            config.omega_x,
            config.gamma_gx,
            0.0,
            config.gamma_cx,
            config.Gamma_cx,
            config.D_tx,
        )
    gamma_g = config.gamma_gx if config.symmetric_modes else config.gamma_gy
    D_t = config.D_tx if config.symmetric_modes else config.D_ty
    return ModeRates(
        config.omega_y, gamma_g, config.gamma_ay, config.gamma_cy, config.Gamma_cy, D_t
    )
