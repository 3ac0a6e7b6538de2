"""Regulated random walks in the nonnegative orthant.

Linear complementarity and Skorokhod-problem solvers, the time-reversed
storage network with pathwise duality checks, increment models for
insurance networks, and Monte Carlo estimators for ruin probabilities.
"""

from .exceptions import OrthantRuinError
from .lcp import LcpSolution, dual_transform_check, inverse_view, solve_lcp, solve_lcp_enum
from .models import HypothesisReport, Model, ModelConfig, build_model
from .orthant import Order, ReflectionMatrix, build_reflection, identity_reflection, order, spectral_radius
from .skorokhod import RuinRecord, SkorokhodReflector, SpPath, comparison_check, detect_ruin, solve_sp
from .storage import (DualityVerdict, HittingTimes, StoragePath, aux_sequence, duality_verdict,
                      hitting_times, reverse_inputs, solve_storage)
from .streams import derive_stream

__version__ = "0.1.0"

__all__ = [
    "OrthantRuinError",
    "LcpSolution", "dual_transform_check", "inverse_view", "solve_lcp", "solve_lcp_enum",
    "HypothesisReport", "Model", "ModelConfig", "build_model",
    "Order", "ReflectionMatrix", "build_reflection", "identity_reflection", "order", "spectral_radius",
    "RuinRecord", "SkorokhodReflector", "SpPath", "comparison_check", "detect_ruin", "solve_sp",
    "DualityVerdict", "HittingTimes", "StoragePath", "aux_sequence", "duality_verdict",
    "hitting_times", "reverse_inputs", "solve_storage",
    "derive_stream",
]
