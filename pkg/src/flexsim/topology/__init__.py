"""
flexsim Topology

Bipartite flexibility architectures and their expansion properties.
"""

from .graph import (
    BipartiteGraph,
    ClusterPartition,
    contiguous_partition,
    format_graph,
    parse_graph,
    read_graph,
    write_graph,
)
from .builders import (
    FAMILIES,
    Topology,
    build_complete,
    build_erdos_renyi_bipartite,
    build_expanded_modular,
    build_family,
    build_inflexible,
    build_modular,
    build_random_modular,
    build_random_regular_bipartite,
    random_partition,
)
from .expansion import (
    ExpanderParams,
    erdos_renyi_expansion,
    expanded_modular_params,
    expander_degree_bound,
    expansion_capacity_guarantee,
    expansion_params,
    theorem1_params,
    verify_expander,
)

__all__ = [
    # Graph
    "BipartiteGraph",
    "ClusterPartition",
    "contiguous_partition",
    "format_graph",
    "parse_graph",
    "read_graph",
    "write_graph",
    # Builders
    "FAMILIES",
    "Topology",
    "build_complete",
    "build_erdos_renyi_bipartite",
    "build_expanded_modular",
    "build_family",
    "build_inflexible",
    "build_modular",
    "build_random_modular",
    "build_random_regular_bipartite",
    "random_partition",
    # Expansion
    "ExpanderParams",
    "erdos_renyi_expansion",
    "expanded_modular_params",
    "expander_degree_bound",
    "expansion_capacity_guarantee",
    "expansion_params",
    "theorem1_params",
    "verify_expander",
]
