"""Finite-time limits and optimal wavepackets for cavity single-photon sources."""
__version__ = "0.1.0"

from .model import CavityChannel, ConfigurationError, SystemParams, cooperativity, critical_time
from .analytic_bounds import lower_bound, upper_bound
from .optimizer import OptimizationTarget, OptimizerConfig, optimize

__all__ = [
    "CavityChannel", "ConfigurationError", "SystemParams", "cooperativity", "critical_time",
    "lower_bound", "upper_bound", "OptimizationTarget", "OptimizerConfig", "optimize",
]
