"""
flexsim Topology Builders

Constructors for the flexibility architectures: complete, inflexible,
modular, random modular, random regular, Erdos-Renyi and expanded modular.
All randomized builders are pure functions of their arguments and seed.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Set, Tuple

import numpy as np

from ..errors import GraphError
from ..rng import SeedLike, make_rng
from .graph import BipartiteGraph, ClusterPartition, contiguous_partition

logger = logging.getLogger(__name__)


def _check_divides(n: int, d: int) -> None:
    if d < 1 or n < 1 or n % d != 0:
        raise GraphError(f"cluster size {d} must divide n={n}")


def build_complete(n: int) -> BipartiteGraph:
    """Fully flexible system: every queue connected to every server."""
    if n < 1:
        raise GraphError("n must be >= 1")
    row = tuple(range(n))
    return BipartiteGraph(n, n, tuple(row for _ in range(n)))


def build_inflexible(n: int) -> BipartiteGraph:
    """Queue i served only by server i."""
    if n < 1:
        raise GraphError("n must be >= 1")
    return BipartiteGraph(n, n, tuple((i,) for i in range(n)))


def build_modular(n: int, d: int, partition: Optional[ClusterPartition] = None) -> BipartiteGraph:
    """Disjoint union of n/d complete d x d blocks given by `partition`."""
    _check_divides(n, d)
    if partition is None:
        partition = contiguous_partition(n, d)
    if partition.n != n or partition.cluster_size != d:
        raise GraphError(f"partition is for n={partition.n}, d={partition.cluster_size}; expected n={n}, d={d}")

    servers_of = [tuple(partition.server_members(k)) for k in range(partition.num_clusters)]
    return BipartiteGraph(n, n, tuple(servers_of[partition.queue_cluster[i]] for i in range(n)))


def random_partition(n: int, d: int, seed: SeedLike = None) -> ClusterPartition:
    """Uniform random queue partition; servers stay in contiguous clusters."""
    _check_divides(n, d)
    rng = make_rng(seed)
    order = rng.permutation(n)
    queue_cluster = [0] * n
    for pos, i in enumerate(order.tolist()):
        queue_cluster[i] = pos // d
    return ClusterPartition(d, tuple(queue_cluster), tuple(j // d for j in range(n)))


def build_random_modular(n: int, d: int, seed: SeedLike = None) -> Tuple[BipartiteGraph, ClusterPartition]:
    """Random Modular architecture and the partition that generated it."""
    partition = random_partition(n, d, seed)
    return build_modular(n, d, partition), partition


def _repair_matching(
    perm: List[int],
    rows: List[Set[int]],
    rng: np.random.Generator,
    max_steps: int,
) -> bool:
    """Swap targets of colliding rows until `perm` avoids every existing edge."""
    n = len(perm)
    bad = [i for i in range(n) if perm[i] in rows[i]]
    steps = 0
    while bad and steps < max_steps:
        steps += 1
        i = bad[-1]
        k = int(rng.integers(n))
        if k == i:
            continue
        if perm[k] not in rows[i] and perm[i] not in rows[k]:
            perm[i], perm[k] = perm[k], perm[i]
            bad.pop()
            if k in bad:
                bad.remove(k)
    return not bad


def build_random_regular_bipartite(n: int, d: int, seed: SeedLike = None) -> BipartiteGraph:
    """
    Random d-regular bipartite graph as a union of d perfect matchings.

    Each matching is a uniform permutation; collisions with edges already
    placed are repaired by random swaps, and a matching that cannot be
    repaired is redrawn. Gives up after 1000(d+1) failed matchings.
    """
    if n < 1 or not 1 <= d <= n:
        raise GraphError(f"need 1 <= d <= n, got n={n}, d={d}")
    rng = make_rng(seed)
    rows: List[Set[int]] = [set() for _ in range(n)]
    max_failures = 1000 * (d + 1)
    failures = 0

    for _ in range(d):
        while True:
            perm = rng.permutation(n).tolist()
            if _repair_matching(perm, rows, rng, max_steps=50 * n):
                break
            failures += 1
            if failures >= max_failures:
                raise GraphError(f"could not build a {d}-regular graph on n={n} after {failures} attempts")
        for i, j in enumerate(perm):
            rows[i].add(j)

    if failures:
        logger.debug(f"regular graph n={n} d={d}: {failures} matchings redrawn")
    return BipartiteGraph(n, n, tuple(tuple(sorted(r)) for r in rows))


def build_erdos_renyi_bipartite(n: int, avg_degree: float, seed: SeedLike = None) -> BipartiteGraph:
    """Each of the n^2 possible edges present independently with probability avg_degree/n."""
    if n < 1 or not 0 < avg_degree <= n:
        raise GraphError(f"need 0 < avg_degree <= n, got {avg_degree}")
    rng = make_rng(seed)
    present = rng.random((n, n)) < (avg_degree / n)
    return BipartiteGraph(n, n, tuple(tuple(np.flatnonzero(present[i]).tolist()) for i in range(n)))


def build_expanded_modular(cluster_graph: BipartiteGraph, d_m: int) -> BipartiteGraph:
    """
    Graph product of a cluster-level graph with complete d_m x d_m blocks.

    Queue i (cluster i // d_m) connects to server j (cluster j // d_m) iff
    the two clusters are adjacent in `cluster_graph`.
    """
    if d_m < 1:
        raise GraphError("d_m must be >= 1")
    if cluster_graph.n_queues != cluster_graph.n_servers:
        raise GraphError("cluster graph must have as many queue clusters as server clusters")
    k = cluster_graph.n_queues
    n = k * d_m

    rows = []
    for i in range(n):
        servers: List[int] = []
        for s in cluster_graph.neighbors(i // d_m):
            servers.extend(range(s * d_m, (s + 1) * d_m))
        rows.append(tuple(servers))
    return BipartiteGraph(n, n, tuple(rows))


FAMILIES = (
    "complete",
    "inflexible",
    "modular",
    "random-modular",
    "regular",
    "erdos-renyi",
    "expanded-modular",
)


@dataclass(frozen=True)
class Topology:
    """A built architecture with whatever structure its policies need."""
    family: str
    graph: BipartiteGraph
    partition: Optional[ClusterPartition] = None
    cluster_graph: Optional[BipartiteGraph] = None

    @property
    def n(self) -> int:
        return self.graph.n_queues


def build_family(
    family: str,
    n: int,
    d: Optional[float] = None,
    seed: SeedLike = None,
    cluster_degree: Optional[int] = None,
) -> Topology:
    """
    Dispatch on a family name.

    For "expanded-modular", `d` is the intra-cluster block size d_m and the
    cluster-level graph is a random `cluster_degree`-regular graph on n/d_m
    clusters.
    """
    if family == "complete":
        return Topology(family, build_complete(n))
    if family == "inflexible":
        return Topology(family, build_inflexible(n), contiguous_partition(n, 1))
    if d is None:
        raise GraphError(f"family {family!r} needs a degree")
    if family == "modular":
        partition = contiguous_partition(n, int(d))
        return Topology(family, build_modular(n, int(d), partition), partition)
    if family == "random-modular":
        graph, partition = build_random_modular(n, int(d), seed)
        return Topology(family, graph, partition)
    if family == "regular":
        return Topology(family, build_random_regular_bipartite(n, int(d), seed))
    if family == "erdos-renyi":
        return Topology(family, build_erdos_renyi_bipartite(n, float(d), seed))
    if family == "expanded-modular":
        d_m = int(d)
        _check_divides(n, d_m)
        k = n // d_m
        cluster_graph = build_random_regular_bipartite(k, min(cluster_degree or 1, k), seed)
        return Topology(
            family,
            build_expanded_modular(cluster_graph, d_m),
            contiguous_partition(n, d_m),
            cluster_graph,
        )
    raise GraphError(f"unknown family: {family}")
