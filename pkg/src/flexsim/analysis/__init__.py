"""
flexsim Analysis

Closed-form queueing formulas and bounds.
"""

from .formulas import (
    BOUNDS,
    BatchMoments,
    BoundReport,
    batch_interarrival_moments,
    erlang_c,
    erlang_c_displayed,
    evaluate_bound,
    exponential_decay_fit,
    kingman_bound,
    mm1_wait,
    mmc_wait_oracle,
    modular_cluster_wait,
    pooled_wait,
    theorem1_delay_bound,
)

__all__ = [
    "BOUNDS",
    "BatchMoments",
    "BoundReport",
    "batch_interarrival_moments",
    "erlang_c",
    "erlang_c_displayed",
    "evaluate_bound",
    "exponential_decay_fit",
    "kingman_bound",
    "mm1_wait",
    "mmc_wait_oracle",
    "modular_cluster_wait",
    "pooled_wait",
    "theorem1_delay_bound",
]
