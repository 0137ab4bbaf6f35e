"""
flexsim Bipartite Graph

Queue-server adjacency structure (the flexibility architecture), cluster
partitions, and the text graph file format.

Ids are 0-based in memory and 1-based in files and printed output.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Sequence, Tuple, Union

import networkx as nx

from ..errors import ConfigError, GraphError


Edge = Tuple[int, int]


@dataclass(frozen=True)
class BipartiteGraph:
    """
    An n_queues x n_servers bipartite graph.

    `queue_adj[i]` is the sorted tuple of servers connected to queue i;
    `server_adj[j]` is the reverse index.
    """
    n_queues: int
    n_servers: int
    queue_adj: Tuple[Tuple[int, ...], ...]
    server_adj: Tuple[Tuple[int, ...], ...] = field(repr=False, compare=False, default=())

    def __post_init__(self):
        if self.n_queues < 0 or self.n_servers < 0:
            raise GraphError("node counts must be non-negative")
        if len(self.queue_adj) != self.n_queues:
            raise GraphError(f"adjacency has {len(self.queue_adj)} rows, expected {self.n_queues}")

        reverse: List[List[int]] = [[] for _ in range(self.n_servers)]
        for i, row in enumerate(self.queue_adj):
            if list(row) != sorted(set(row)):
                raise GraphError(f"queue {i + 1}: neighbors must be sorted and unique")
            for j in row:
                if not 0 <= j < self.n_servers:
                    raise GraphError(f"edge ({i + 1},{j + 1}) out of range")
                reverse[j].append(i)
        object.__setattr__(self, "server_adj", tuple(tuple(r) for r in reverse))

    # ========== CONSTRUCTION ==========

    @classmethod
    def from_edges(cls, n_queues: int, n_servers: int, edges: Iterable[Edge]) -> "BipartiteGraph":
        """Build from 0-based (queue, server) pairs; duplicates are rejected."""
        rows: List[set] = [set() for _ in range(n_queues)]
        for i, j in edges:
            if not (0 <= i < n_queues and 0 <= j < n_servers):
                raise GraphError(f"edge ({i + 1},{j + 1}) out of range")
            if j in rows[i]:
                raise GraphError(f"duplicate edge ({i + 1},{j + 1})")
            rows[i].add(j)
        return cls(n_queues, n_servers, tuple(tuple(sorted(r)) for r in rows))

    @classmethod
    def from_neighbor_sets(cls, n_servers: int, rows: Sequence[Iterable[int]]) -> "BipartiteGraph":
        return cls(len(rows), n_servers, tuple(tuple(sorted(set(r))) for r in rows))

    # ========== QUERIES ==========

    def neighbors(self, i: int) -> Tuple[int, ...]:
        """N(i): servers connected to queue i."""
        return self.queue_adj[i]

    def server_neighbors(self, j: int) -> Tuple[int, ...]:
        """N(j): queues connected to server j."""
        return self.server_adj[j]

    def neighborhood(self, queues: Iterable[int]) -> FrozenSet[int]:
        """N(S) for a set of queues."""
        out: set = set()
        for i in queues:
            out.update(self.queue_adj[i])
        return frozenset(out)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.queue_adj[i]

    def edges(self) -> Iterator[Edge]:
        """All edges, ascending by (queue, server)."""
        for i, row in enumerate(self.queue_adj):
            for j in row:
                yield (i, j)

    @property
    def num_edges(self) -> int:
        return sum(len(row) for row in self.queue_adj)

    def queue_degree(self, i: int) -> int:
        return len(self.queue_adj[i])

    def server_degree(self, j: int) -> int:
        return len(self.server_adj[j])

    def avg_degree(self, side: str = "queues") -> float:
        """Average degree over left ("queues") or right ("servers") nodes."""
        count = self.n_queues if side == "queues" else self.n_servers
        if side not in ("queues", "servers"):
            raise ValueError(f"unknown side: {side}")
        return self.num_edges / count if count else 0.0

    def max_degree(self) -> int:
        degrees = [len(r) for r in self.queue_adj] + [len(r) for r in self.server_adj]
        return max(degrees, default=0)

    def isolated_queues(self) -> List[int]:
        return [i for i, row in enumerate(self.queue_adj) if not row]

    def neighbor_masks(self) -> List[int]:
        """Per-queue server sets as integer bitmasks."""
        masks = []
        for row in self.queue_adj:
            m = 0
            for j in row:
                m |= 1 << j
            masks.append(m)
        return masks

    def to_networkx(self) -> nx.Graph:
        """Undirected networkx graph with nodes ("q", i) and ("s", j)."""
        g = nx.Graph()
        g.add_nodes_from((("q", i) for i in range(self.n_queues)), bipartite=0)
        g.add_nodes_from((("s", j) for j in range(self.n_servers)), bipartite=1)
        g.add_edges_from((("q", i), ("s", j)) for i, j in self.edges())
        return g

    def to_dict(self) -> Dict[str, object]:
        return {
            "n_queues": self.n_queues,
            "n_servers": self.n_servers,
            "edges": self.num_edges,
            "avg_degree": round(self.avg_degree(), 6),
        }


@dataclass(frozen=True)
class ClusterPartition:
    """
    Equal-size clusters of queues and servers.

    `queue_cluster[i]` / `server_cluster[j]` give the cluster index of each
    node; every cluster holds exactly `cluster_size` queues and servers.
    """
    cluster_size: int
    queue_cluster: Tuple[int, ...]
    server_cluster: Tuple[int, ...]

    def __post_init__(self):
        d = self.cluster_size
        n = len(self.queue_cluster)
        if d < 1 or n % d != 0:
            raise GraphError(f"cluster size {d} does not divide {n}")
        if len(self.server_cluster) != n:
            raise GraphError("queue and server sides must have the same size")
        k = n // d
        for side, assignment in (("queue", self.queue_cluster), ("server", self.server_cluster)):
            counts = [0] * k
            for c in assignment:
                if not 0 <= c < k:
                    raise GraphError(f"{side} cluster index {c} out of range")
                counts[c] += 1
            if any(c != d for c in counts):
                raise GraphError(f"{side} clusters must all have exactly {d} members")

    @property
    def n(self) -> int:
        return len(self.queue_cluster)

    @property
    def num_clusters(self) -> int:
        return self.n // self.cluster_size

    def queue_members(self, k: int) -> List[int]:
        """A_k: queues in cluster k, ascending."""
        return [i for i, c in enumerate(self.queue_cluster) if c == k]

    def server_members(self, k: int) -> List[int]:
        """B_k: servers in cluster k, ascending."""
        return [j for j, c in enumerate(self.server_cluster) if c == k]

    def queue_clusters(self) -> List[List[int]]:
        clusters: List[List[int]] = [[] for _ in range(self.num_clusters)]
        for i, c in enumerate(self.queue_cluster):
            clusters[c].append(i)
        return clusters


def contiguous_partition(n: int, d: int) -> ClusterPartition:
    """The first d queues and servers form cluster 0, the next d cluster 1, ..."""
    if d < 1 or n % d != 0:
        raise GraphError(f"cluster size {d} does not divide {n}")
    assignment = tuple(i // d for i in range(n))
    return ClusterPartition(d, assignment, assignment)


# ========== GRAPH FILES ==========

def format_graph(g: BipartiteGraph) -> str:
    lines = [f"bipartite {g.n_queues} {g.n_servers}"]
    lines.extend(f"{i + 1} {j + 1}" for i, j in g.edges())
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> BipartiteGraph:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ConfigError("empty graph file")
    header = lines[0].split()
    if len(header) != 3 or header[0] != "bipartite":
        raise ConfigError(f"bad graph header: {lines[0]!r}")
    try:
        n_queues, n_servers = int(header[1]), int(header[2])
        edges = []
        for ln in lines[1:]:
            a, b = ln.split()
            edges.append((int(a) - 1, int(b) - 1))
    except ValueError:
        raise ConfigError("graph edges must be pairs of integers")
    try:
        return BipartiteGraph.from_edges(n_queues, n_servers, edges)
    except GraphError as e:
        raise ConfigError(str(e))


def write_graph(g: BipartiteGraph, path: Union[str, Path]) -> None:
    Path(path).write_text(format_graph(g), encoding="utf-8")


def read_graph(path: Union[str, Path]) -> BipartiteGraph:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"graph file not found: {p}")
    return parse_graph(p.read_text(encoding="utf-8"))
