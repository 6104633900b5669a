"""Builtin targets."""

from .bnn import BnnSpec, BnnTarget, build_bnn_target, simulate_bnn_data
from .data import RegressionData, read_csv, read_series
from .spike_slab import (
    RegressionTarget,
    SpikeSlabPrior,
    build_regression_target,
    coefficients,
    posterior_zero_fraction,
    rescale_coefficients,
    simulate_regression,
    solve_spike_slab_hyperparams,
    spike_slab_stats,
)
from .toy import (
    CircleTarget,
    FreeParticle,
    MaxModel,
    StandardNormal,
    circle_marginal_pdf,
    circle_target,
    max_model,
    max_model_marginal_cdf,
    max_model_marginal_pdf,
)
from .volatility import (
    VolatilityParams,
    VolatilityTarget,
    build_volatility_target,
    simulate_volatility,
)

__all__ = [
    "BnnSpec", "BnnTarget", "build_bnn_target", "simulate_bnn_data",
    "RegressionData", "read_csv", "read_series",
    "RegressionTarget", "SpikeSlabPrior", "build_regression_target", "coefficients",
    "posterior_zero_fraction", "rescale_coefficients", "simulate_regression",
    "solve_spike_slab_hyperparams", "spike_slab_stats",
    "CircleTarget", "FreeParticle", "MaxModel", "StandardNormal", "circle_marginal_pdf",
    "circle_target", "max_model", "max_model_marginal_cdf", "max_model_marginal_pdf",
    "VolatilityParams", "VolatilityTarget", "build_volatility_target", "simulate_volatility",
]
