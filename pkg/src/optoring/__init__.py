"""Phonon transport in lattices of optically coupled optomechanical resonators."""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, InstabilityError, NumericalError,
                     OptoringError, SolverError)
from .model import (UNIT_CONVENTION, DriveSpec, LatticeSpec, ModelParams,
                    build_open_chain, build_ring, uniform_ring_params, validate_regime)
from .meanfield import MeanFieldSolution, solve_mean_field

__all__ = [
    "__version__", "ConfigError", "DomainError", "InstabilityError", "NumericalError",
    "OptoringError", "SolverError", "UNIT_CONVENTION", "DriveSpec", "LatticeSpec", "ModelParams",
    "build_open_chain", "build_ring", "uniform_ring_params", "validate_regime",
    "MeanFieldSolution", "solve_mean_field",
]
