"""Simulation and inference for the memory parameter of the elephant random walk."""

__version__ = "0.1.0"

from .errors import ERWError  # noqa: E402
from .estimator import (  # noqa: E402
    EstimateReport,
    EstimatorState,
    conditional_fisher,
    estimate,
    lan_split,
    log_likelihood,
    martingale_m,
    predictable_qv,
    quasi_log_likelihood,
    score,
    update,
    v_statistic,
)
from .rng import RngStream, stream_index  # noqa: E402
from .walk import MemoryParams, WalkPath, extend_walk, simulate_walk, step_probability  # noqa: E402

__all__ = [
    "ERWError", "EstimateReport", "EstimatorState", "MemoryParams", "RngStream", "WalkPath",
    "conditional_fisher", "estimate", "extend_walk", "lan_split", "log_likelihood", "martingale_m",
    "predictable_qv", "quasi_log_likelihood", "score", "simulate_walk", "step_probability",
    "stream_index", "update", "v_statistic",
]
