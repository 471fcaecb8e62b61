from .config import (
    DerivedParams,
    SystemConfig,
    derive_parameters,
    load_config,
    mass_from_geometry,
)
from .context import RunSettings, settings
from .errors import LevsimError
from .executor import ContextPreservingExecutor, parallel_map

__version__ = "0.1.0"

__all__ = [
    "SystemConfig",
    "DerivedParams",
    "load_config",
    "mass_from_geometry",
    "derive_parameters",
    "RunSettings",
    "settings",
    "ContextPreservingExecutor",
    "parallel_map",
    "LevsimError",
]
