"""
flexsim Greedy Policies

Longest-connected-queue greedy on any graph, and greedy restricted to the
clusters of a modular architecture.
"""

from typing import TYPE_CHECKING, List

from ..errors import ConfigError, SimulationError
from ..topology.graph import BipartiteGraph, ClusterPartition
from .base import Policy, PolicySpec, register_policy

if TYPE_CHECKING:
    from ..sim.engine import Simulation
    from ..sim.model import Job


def greedy_policy() -> PolicySpec:
    return PolicySpec("greedy")


def modular_greedy_policy(partition: ClusterPartition) -> PolicySpec:
    return PolicySpec("modular", partition=partition)


@register_policy("greedy")
class GreedyPolicy(Policy):
    """
    A freed server fetches the head job of its longest nonempty connected
    queue (ties to the lowest queue index). An arriving job goes to the
    lowest-indexed Idle connected server, else waits.
    """

    @property
    def work_conserving(self) -> bool:
        return True

    def on_arrival(self, sim: "Simulation", job: "Job") -> None:
        server_job = sim.state.server_job
        for j in self.graph.neighbors(job.queue_id):
            if server_job[j] is None:
                sim.start_service(j, job)
                return
        sim.state.queues[job.queue_id].append(job)

    def on_completion(self, sim: "Simulation", server: int, job: "Job") -> None:
        queues = sim.state.queues
        best = -1
        best_len = 0
        for i in self.graph.server_neighbors(server):
            length = len(queues[i])
            if length > best_len:
                best, best_len = i, length
        if best >= 0:
            sim.start_service(server, queues[best].popleft())


@register_policy("modular")
class ModularGreedyPolicy(Policy):
    """
    Each cluster runs as its own M/M/d queue: a freed server takes the head
    job of the lowest-indexed nonempty queue in its cluster, and an arrival
    goes to the lowest-indexed Idle server of its cluster.
    """

    def __init__(self, spec: PolicySpec, graph: BipartiteGraph):
        super().__init__(spec, graph)
        partition = spec.partition
        if partition is None:
            raise ConfigError("modular policy needs a cluster partition", field="policy.partition")
        if partition.n != graph.n_queues or graph.n_queues != graph.n_servers:
            raise SimulationError(f"partition covers {partition.n} nodes, graph has {graph.n_queues}")
        self.partition = partition
        self._cluster_queues: List[List[int]] = partition.queue_clusters()
        self._cluster_servers: List[List[int]] = [
            partition.server_members(k) for k in range(partition.num_clusters)
        ]

    @property
    def work_conserving(self) -> bool:
        return True

    def attach(self, sim: "Simulation") -> None:
        for i in range(self.graph.n_queues):
            expected = tuple(self._cluster_servers[self.partition.queue_cluster[i]])
            if self.graph.neighbors(i) != expected:
                raise SimulationError(f"queue {i + 1}: graph does not match the cluster partition")

    def on_arrival(self, sim: "Simulation", job: "Job") -> None:
        server_job = sim.state.server_job
        for j in self._cluster_servers[self.partition.queue_cluster[job.queue_id]]:
            if server_job[j] is None:
                sim.start_service(j, job)
                return
        sim.state.queues[job.queue_id].append(job)

    def on_completion(self, sim: "Simulation", server: int, job: "Job") -> None:
        queues = sim.state.queues
        for i in self._cluster_queues[self.partition.server_cluster[server]]:
            if queues[i]:
                sim.start_service(server, queues[i].popleft())
                return
