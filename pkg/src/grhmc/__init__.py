"""Event-aware continuous-time Hamiltonian Monte Carlo for piecewise targets."""

from .core import (
    BoundaryType,
    HamiltonianValue,
    PhasePoint,
    Standardizer,
    TargetModel,
    hamiltonian,
    region_index,
    rhs,
    standardize,
    unstandardize,
)
from .errors import (
    ConfigError,
    ContractViolation,
    DataError,
    DegenerateBoundary,
    GRHMCError,
    InitializationError,
    IntegrationFailure,
    NonFiniteError,
    SolverError,
)
from .integrator import IntegratorConfig
from .sampler import EnsembleResult, SampleChain, SamplerConfig, run_ensemble, simulate_trajectory

__version__ = "0.1.0"

__all__ = [
    "BoundaryType", "HamiltonianValue", "PhasePoint", "Standardizer", "TargetModel",
    "hamiltonian", "region_index", "rhs", "standardize", "unstandardize",
    "ConfigError", "ContractViolation", "DataError", "DegenerateBoundary", "GRHMCError",
    "InitializationError", "IntegrationFailure", "NonFiniteError", "SolverError",
    "IntegratorConfig", "EnsembleResult", "SampleChain", "SamplerConfig", "run_ensemble",
    "simulate_trajectory", "__version__",
]
