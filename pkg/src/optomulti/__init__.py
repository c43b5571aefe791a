"""Simulator for a laser-driven cavity coupled to a cantilever, spanning
the classical mean-field regime and the quantum trajectory regime."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConvergenceError,
    NormCollapseError,
    SimulationError,
    TruncationLeakError,
)
from .model import DerivedCouplings, FockConfig, ModelParams, derive_couplings

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "NormCollapseError",
    "SimulationError",
    "TruncationLeakError",
    "DerivedCouplings",
    "FockConfig",
    "ModelParams",
    "derive_couplings",
]
