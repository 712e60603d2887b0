"""Dissipative Ising dynamics of trapped-ion spin ensembles in a Penning trap."""
from importlib.metadata import PackageNotFoundError, version

from .errors import (ConfigError, ConvergenceError, InstabilityError, InvariantViolation,
                     PenningIsingError, PhysicsDomainError, ResonanceError)
from .model import (DriveConfig, MeasurementDirection, SpinEnsembleParams, TrapConfig,
                    convert_coupling, to_hz)

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "ConfigError", "ConvergenceError", "DriveConfig", "InstabilityError",
    "InvariantViolation", "MeasurementDirection", "PenningIsingError",
    "PhysicsDomainError", "ResonanceError", "SpinEnsembleParams", "TrapConfig",
    "convert_coupling", "to_hz", "__version__",
]
