"""
flexsim Flow Network

Max-flow on the source -> queues -> servers -> sink network of a bipartite
graph, with residual-reachability helpers for cut certificates.
"""

from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Sequence, Set, Tuple

import networkx as nx
from networkx.algorithms.flow import edmonds_karp

from ..topology.graph import BipartiteGraph


SOURCE = "source"
SINK = "sink"
RESIDUAL_FLOOR = 1e-12


def queue_node(i: int) -> Tuple[str, int]:
    return ("q", i)


def server_node(j: int) -> Tuple[str, int]:
    return ("s", j)


@dataclass
class FlowSolution:
    """Max-flow value, per-edge flows and the residual network."""
    value: float
    edge_flows: Dict[Tuple[int, int], float]
    server_loads: List[float]
    residual: nx.DiGraph

    def _residual_capacity(self, u, v) -> float:
        attrs = self.residual[u][v]
        return attrs["capacity"] - attrs["flow"]

    def reachable_from_source(self, tol: float = RESIDUAL_FLOOR) -> Set:
        """Nodes reachable from the source along edges with residual > tol."""
        seen = {SOURCE}
        frontier = deque([SOURCE])
        while frontier:
            u = frontier.popleft()
            for v in self.residual.successors(u):
                if v not in seen and self._residual_capacity(u, v) > tol:
                    seen.add(v)
                    frontier.append(v)
        return seen

    def reaching_sink(self, tol: float = RESIDUAL_FLOOR) -> Set:
        """Nodes with a residual path (> tol on every edge) into the sink."""
        seen = {SINK}
        frontier = deque([SINK])
        while frontier:
            v = frontier.popleft()
            for u in self.residual.predecessors(v):
                if u not in seen and self._residual_capacity(u, v) > tol:
                    seen.add(u)
                    frontier.append(u)
        return seen


def build_flow_network(
    g: BipartiteGraph,
    demands: Sequence[float],
    server_capacity: float,
) -> nx.DiGraph:
    """Source edges carry the demands, graph edges are uncapacitated."""
    net = nx.DiGraph()
    net.add_node(SOURCE)
    for i in range(g.n_queues):
        net.add_edge(SOURCE, queue_node(i), capacity=float(demands[i]))
    for j in range(g.n_servers):
        net.add_edge(server_node(j), SINK, capacity=float(server_capacity))
    for i, j in g.edges():
        # no capacity attribute: networkx treats the edge as infinite
        net.add_edge(queue_node(i), server_node(j))
    return net


def solve_max_flow(g: BipartiteGraph, demands: Sequence[float], server_capacity: float) -> FlowSolution:
    """Max flow with per-server capacity `server_capacity`."""
    net = build_flow_network(g, demands, server_capacity)
    residual = edmonds_karp(net, SOURCE, SINK)

    edge_flows: Dict[Tuple[int, int], float] = {}
    for i, j in g.edges():
        f = residual[queue_node(i)][server_node(j)]["flow"]
        if f > RESIDUAL_FLOOR:
            edge_flows[(i, j)] = f
    loads = [max(0.0, residual[server_node(j)][SINK]["flow"]) for j in range(g.n_servers)]
    return FlowSolution(
        value=residual.graph["flow_value"],
        edge_flows=edge_flows,
        server_loads=loads,
        residual=residual,
    )
