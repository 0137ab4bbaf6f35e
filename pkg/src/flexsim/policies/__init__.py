"""
flexsim Policies

Scheduling policies: greedy, modular greedy, virtual-queue batching and
Expanded Modular.
"""

from .base import POLICY_KINDS, Policy, PolicySpec, register_policy
from .expanded_modular import ExpandedModularPolicy, cluster_choice_probabilities, expanded_modular_policy
from .factory import build_policy
from .greedy import GreedyPolicy, ModularGreedyPolicy, greedy_policy, modular_greedy_policy
from .virtual_queue import (
    B_N_MODES,
    Batch,
    BatchState,
    VirtualQueuePolicy,
    VQParams,
    figure_batch_size,
    find_batch_assignment,
    make_vq_params,
    virtual_queue_policy,
)

__all__ = [
    # Base
    "POLICY_KINDS",
    "Policy",
    "PolicySpec",
    "register_policy",
    "build_policy",
    # Greedy
    "GreedyPolicy",
    "ModularGreedyPolicy",
    "greedy_policy",
    "modular_greedy_policy",
    # Virtual queue
    "B_N_MODES",
    "Batch",
    "BatchState",
    "VirtualQueuePolicy",
    "VQParams",
    "figure_batch_size",
    "find_batch_assignment",
    "make_vq_params",
    "virtual_queue_policy",
    # Expanded modular
    "ExpandedModularPolicy",
    "cluster_choice_probabilities",
    "expanded_modular_policy",
]
