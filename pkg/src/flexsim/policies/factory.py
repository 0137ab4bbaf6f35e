"""
flexsim Policy Factory

Builds a PolicySpec from a policy name and a built topology, the way
scenario files and the CLI describe policies.
"""

import logging
from typing import Optional

from ..capacity.region import RatesLike
from ..errors import ConfigError
from ..topology.builders import Topology
from .base import POLICY_KINDS, PolicySpec
from .expanded_modular import expanded_modular_policy
from .greedy import greedy_policy, modular_greedy_policy
from .virtual_queue import B_N_MODES, figure_batch_size, make_vq_params, virtual_queue_policy

logger = logging.getLogger(__name__)


def build_policy(
    kind: str,
    topology: Topology,
    lam: RatesLike,
    rho: float,
    b_n_mode: str = "figure",
    b_n: Optional[float] = None,
    augment: bool = False,
) -> PolicySpec:
    """
    `b_n_mode` selects the virtual-queue batch size: "theorem1" (the
    expander formula), "figure" (n ln n / d) or "explicit" (`b_n`). With
    `augment` the virtual-queue parameters are derived at (1 + rho)/2.
    """
    if kind not in POLICY_KINDS:
        raise ConfigError(f"unknown policy {kind!r}; expected one of {POLICY_KINDS}", field="policy.kind")

    if kind == "greedy":
        if augment:
            logger.warning("dummy arrival streams are only used by the virtual-queue policy; ignoring augment")
        return greedy_policy()

    if kind == "modular":
        if topology.partition is None:
            raise ConfigError(f"family {topology.family!r} has no cluster partition", field="policy.kind")
        return modular_greedy_policy(topology.partition)

    if kind == "expanded-modular":
        if topology.cluster_graph is None or topology.partition is None:
            raise ConfigError("expanded-modular policy needs the expanded-modular family", field="policy.kind")
        return expanded_modular_policy(topology.cluster_graph, topology.partition, lam, rho)

    if b_n_mode not in B_N_MODES:
        raise ConfigError(f"unknown b_n_mode {b_n_mode!r}; expected one of {B_N_MODES}", field="policy.b_n_mode")
    n = topology.n
    d = max(1, round(topology.graph.avg_degree()))
    rho_eff = (1 + rho) / 2 if augment else rho
    if b_n_mode == "explicit":
        if b_n is None:
            raise ConfigError("b_n_mode = explicit needs b_n", field="policy.b_n")
        params = make_vq_params(n, rho_eff, b_n, d)
    elif b_n_mode == "figure":
        params = make_vq_params(n, rho_eff, figure_batch_size(n, d), d)
    else:
        params = make_vq_params(n, rho_eff, None, d)
    return virtual_queue_policy(params, augment=augment, rho=rho)
