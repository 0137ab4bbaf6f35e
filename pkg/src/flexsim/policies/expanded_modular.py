"""
flexsim Expanded Modular Policy

Two stages. Once per rate vector, route cluster loads over the cluster-level
graph with server-cluster capacity (1+rho)/2 * d_m. At run time a freed
server in cluster s picks a neighbouring queue cluster q with probability
p_{s,q}, serves the lowest-indexed nonempty queue there, or idles for an
Exp(1) period when that cluster is empty.
"""

import logging
import math
from typing import TYPE_CHECKING, Any, Dict, List, Sequence, Tuple

from ..capacity.region import RatesLike, is_feasible, modular_cluster_loads
from ..errors import ConfigError, DomainError, InfeasibleFlowError, SimulationError
from ..rng import POLICY, exponential_stream, substream, uniform_stream
from ..topology.graph import BipartiteGraph, ClusterPartition
from .base import Policy, PolicySpec, register_policy

if TYPE_CHECKING:
    from ..sim.engine import Simulation
    from ..sim.model import Job

logger = logging.getLogger(__name__)


PICK = "pick"


def cluster_choice_probabilities(flows: Sequence[float], rho: float) -> List[float]:
    """
    p_{s,q} over the neighbours q of one server cluster s.

    `flows[k]` is the flow from the k-th neighbour into s. Mixes the flow
    shares (weight (1+rho)/2) with a uniform choice (weight (1-rho)/2); with
    no inflow the choice is uniform.
    """
    deg = len(flows)
    if deg == 0:
        return []
    total = math.fsum(flows)
    uniform = 1.0 / deg
    if total <= 0:
        return [uniform] * deg
    return [f / total * (1 + rho) / 2 + uniform * (1 - rho) / 2 for f in flows]


def expanded_modular_policy(
    cluster_graph: BipartiteGraph,
    partition: ClusterPartition,
    lam: RatesLike,
    rho: float,
) -> PolicySpec:
    """
    Solve the cluster-level flow and build the server choice table.

    Raises InfeasibleFlowError carrying the violating cut when the cluster
    loads cannot be routed within (1+rho)/2 * d_m per server cluster.
    """
    if not 0 < rho < 1:
        raise DomainError(f"rho must be in (0, 1), got {rho}")
    k = partition.num_clusters
    if cluster_graph.n_queues != k or cluster_graph.n_servers != k:
        raise ConfigError(
            f"cluster graph is {cluster_graph.n_queues}x{cluster_graph.n_servers}, partition has {k} clusters",
            field="topology",
        )
    d_m = partition.cluster_size
    loads = modular_cluster_loads(partition, lam)
    result = is_feasible(cluster_graph, [x / d_m for x in loads], slack=(1 - rho) / 2)
    if not result.is_feasible:
        raise InfeasibleFlowError(
            f"cluster loads cannot be routed within {(1 + rho) / 2 * d_m:.6g} per server cluster",
            cut=result.to_dict(),
        )

    flow = {edge: f * d_m for edge, f in (result.flow or {}).items()}
    table: List[Tuple[Tuple[int, float], ...]] = []
    for s in range(k):
        nbrs = cluster_graph.server_neighbors(s)
        probs = cluster_choice_probabilities([flow.get((q, s), 0.0) for q in nbrs], rho)
        table.append(tuple(zip(nbrs, probs)))
    logger.debug(f"expanded modular stage 1: {k} clusters, total flow {sum(flow.values()):.6g}")
    return PolicySpec("expanded-modular", partition=partition, cluster_probs=tuple(table), rho=rho)


@register_policy("expanded-modular")
class ExpandedModularPolicy(Policy):
    def __init__(self, spec: PolicySpec, graph: BipartiteGraph):
        super().__init__(spec, graph)
        if spec.partition is None or spec.cluster_probs is None:
            raise ConfigError("expanded-modular policy needs a partition and a cluster flow", field="policy")
        self.partition = spec.partition
        self._cluster_queues = self.partition.queue_clusters()
        self._choices = [[q for q, _ in row] for row in spec.cluster_probs]
        self._cumulative: List[List[float]] = []
        for row in spec.cluster_probs:
            acc, cum = 0.0, []
            for _, p in row:
                acc += p
                cum.append(acc)
            self._cumulative.append(cum)
        self.idle_periods = 0
        self._uniform = None
        self._idle_periods = None

    def attach(self, sim: "Simulation") -> None:
        if self.partition.n != self.graph.n_queues:
            raise SimulationError(f"partition covers {self.partition.n} nodes, graph has {self.graph.n_queues}")
        for i in range(self.graph.n_queues):
            q = self.partition.queue_cluster[i]
            expected = sorted(
                j
                for s, row in enumerate(self._choices)
                if q in row
                for j in self.partition.server_members(s)
            )
            if list(self.graph.neighbors(i)) != expected:
                raise SimulationError(f"queue {i + 1}: graph does not match the cluster graph")
        isolated = self.graph.isolated_queues()
        if isolated:
            raise ConfigError(f"queues {[i + 1 for i in isolated]} have no servers", field="topology")
        self._uniform = uniform_stream(sim.policy_rng)
        self._idle_periods = exponential_stream(substream(sim.seed, POLICY, 1))
        for j in range(self.graph.n_servers):
            sim.schedule(0.0, PICK, j, entity=j)

    def _choose_cluster(self, s: int) -> int:
        cum = self._cumulative[s]
        u = self._uniform.next() * cum[-1]
        for q, c in zip(self._choices[s], cum):
            if u < c:
                return q
        return self._choices[s][-1]

    def _pick(self, sim: "Simulation", server: int) -> None:
        s = self.partition.server_cluster[server]
        if not self._choices[s]:
            return
        q = self._choose_cluster(s)
        queues = sim.state.queues
        for i in self._cluster_queues[q]:
            if queues[i]:
                sim.start_service(server, queues[i].popleft())
                return
        self.idle_periods += 1
        sim.schedule(sim.clock + self._idle_periods.next(), PICK, server, entity=server)

    def on_arrival(self, sim: "Simulation", job: "Job") -> None:
        sim.state.queues[job.queue_id].append(job)

    def on_completion(self, sim: "Simulation", server: int, job: "Job") -> None:
        self._pick(sim, server)

    def on_timer(self, sim: "Simulation", key: str, payload: Any) -> None:
        if key == PICK and sim.state.is_idle(payload):
            self._pick(sim, payload)

    def diagnostics(self, sim: "Simulation") -> Dict[str, Any]:
        return {"idle_periods": self.idle_periods}
