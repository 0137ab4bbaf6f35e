"""
flexsim Capacity

Feasibility of arrival rate vectors via max-flow / min-cut.
"""

from .flows import FlowSolution, solve_max_flow
from .region import (
    FeasibilityResult,
    FixedRates,
    RateClass,
    RateClassSampler,
    RateSampler,
    RateVector,
    SparseBernoulliRates,
    UniformRates,
    Verdict,
    adversarial_modular_rates,
    augment_rates,
    estimate_feasibility_probability,
    format_rates,
    hall_oracle,
    is_feasible,
    modular_cluster_loads,
    parse_rates,
    rate_condition_check,
    read_rates,
    write_rates,
)

__all__ = [
    # Flows
    "FlowSolution",
    "solve_max_flow",
    # Region
    "FeasibilityResult",
    "RateClass",
    "RateVector",
    "Verdict",
    "adversarial_modular_rates",
    "augment_rates",
    "estimate_feasibility_probability",
    "hall_oracle",
    "is_feasible",
    "modular_cluster_loads",
    "rate_condition_check",
    # Samplers
    "FixedRates",
    "RateClassSampler",
    "RateSampler",
    "SparseBernoulliRates",
    "UniformRates",
    # Files
    "format_rates",
    "parse_rates",
    "read_rates",
    "write_rates",
]
