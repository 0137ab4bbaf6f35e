"""
flexsim Virtual Queue Policy

Batching policy for expander architectures. Arrivals are grouped into
batches of batch_jobs jobs which wait FIFO in a virtual queue. Time is cut
into slots of length s. A batch that finds the virtual queue empty is matched
at the end of its arrival slot; one queued behind another is matched one
slot after that batch departs. The match assigns every job to a distinct
idle server; when none exists the batch falls back to greedy assignment and
departs at the first boundary after its last job starts.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Deque, Dict, Iterable, List, Optional, Sequence

import networkx as nx
import numpy as np

from ..analysis.formulas import kingman_bound
from ..errors import ConfigError, DomainError
from ..topology.expansion import theorem1_params
from ..topology.graph import BipartiteGraph
from .base import Policy, PolicySpec, register_policy

if TYPE_CHECKING:
    from ..sim.engine import Simulation
    from ..sim.model import Job

logger = logging.getLogger(__name__)


BOUNDARY = "boundary"
B_N_MODES = ("theorem1", "figure", "explicit")


# ========== PARAMETERS ==========

@dataclass(frozen=True)
class VQParams:
    """Batch size, slot length and the load parameters they derive from."""
    n: int
    rho: float
    epsilon: float
    rho_hat: float
    batch_jobs: int
    b_n: float
    slot_length: float
    beta_n: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "rho": self.rho,
            "epsilon": self.epsilon,
            "rho_hat": self.rho_hat,
            "batch_jobs": self.batch_jobs,
            "b_n": self.b_n,
            "slot_length": self.slot_length,
            "beta_n": self.beta_n,
        }


def figure_batch_size(n: int, d: float) -> float:
    """b_n = n ln(n) / d."""
    if n < 2 or d <= 0:
        raise DomainError(f"need n >= 2 and d > 0, got n={n}, d={d}")
    return n * math.log(n) / d


def make_vq_params(
    n: int,
    rho: float,
    b_n_override: Optional[float] = None,
    d: Optional[int] = None,
) -> VQParams:
    """
    Derive slot and batch parameters.

    Without an override b_n = 320/(1-rho)^2 * n ln(n) / beta_n with beta_n
    from the expander parameterisation at degree d. batch_jobs is rho*b_n
    rounded half up and must be at least 1.
    """
    if not 0 < rho < 1:
        raise DomainError(f"rho must be in (0, 1), got {rho}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    rho_hat = 1 / (1 + (1 - rho) / 8)
    beta_n = math.nan
    if d is not None:
        params = theorem1_params(n, d, rho)
        beta_n = params.beta_n
        rho_hat = params.rho_hat

    if b_n_override is not None:
        b_n = float(b_n_override)
    else:
        if d is None:
            raise DomainError("the default batch size needs the graph degree d")
        if n < 2:
            raise DomainError("the default batch size needs n >= 2")
        b_n = 320 / (1 - rho) ** 2 * n * math.log(n) / beta_n

    epsilon = (1 - rho) / 2
    slot = (rho + epsilon) * b_n / n
    batch_jobs = math.floor(rho * b_n + 0.5)
    if batch_jobs < 1:
        raise DomainError(f"rho*b_n = {rho * b_n:.6g} rounds to {batch_jobs}; batches need at least one job")
    if not slot > 0:
        raise DomainError(f"slot length must be > 0, got {slot}")
    return VQParams(
        n=n,
        rho=rho,
        epsilon=epsilon,
        rho_hat=rho_hat,
        batch_jobs=batch_jobs,
        b_n=b_n,
        slot_length=slot,
        beta_n=beta_n,
    )


def virtual_queue_policy(params: VQParams, augment: bool = False, rho: Optional[float] = None) -> PolicySpec:
    """
    With `augment`, `rho` is the original intensity used for the dummy
    streams; `params` should then be derived at (1 + rho)/2.
    """
    return PolicySpec("virtual-queue", vq=params, augment=augment, rho=rho if rho is not None else params.rho)


# ========== MATCHING ==========

def find_batch_assignment(
    g: BipartiteGraph,
    batch_queue_ids: Sequence[int],
    idle: Iterable[int],
) -> Optional[Dict[int, int]]:
    """
    Assign every batch job to a distinct idle server it is connected to.

    Returns {job position: server} or None when no full assignment exists.
    Jobs and servers are scanned in index order, so the result is
    deterministic.
    """
    idle_set = set(idle)
    if len(batch_queue_ids) > len(idle_set):
        return None
    if not batch_queue_ids:
        return {}

    bg = nx.Graph()
    jobs = [("job", k) for k in range(len(batch_queue_ids))]
    bg.add_nodes_from(jobs, bipartite=0)
    for k, i in enumerate(batch_queue_ids):
        eligible = [j for j in g.neighbors(i) if j in idle_set]
        if not eligible:
            return None
        bg.add_edges_from((("job", k), ("s", j)) for j in eligible)

    matching = nx.bipartite.hopcroft_karp_matching(bg, top_nodes=jobs)
    assignment = {k: matching[("job", k)][1] for k in range(len(batch_queue_ids)) if ("job", k) in matching}
    if len(assignment) < len(batch_queue_ids):
        return None
    return assignment


# ========== RUNTIME ==========

class BatchState(str, Enum):
    FORMING = "Forming"
    WAITING = "WaitingInVQ"
    IN_SERVICE = "InService"
    FALLBACK = "FallbackGreedy"
    DEPARTED = "Departed"


@dataclass
class Batch:
    index: int
    jobs: List["Job"]
    formation_time: float
    partial: bool = False
    state: BatchState = BatchState.WAITING
    start_time: Optional[float] = None
    departure_time: Optional[float] = None
    unassigned: List[int] = field(default_factory=list)
    last_assign_time: Optional[float] = None
    long_service: bool = False


@register_policy("virtual-queue")
class VirtualQueuePolicy(Policy):
    """Runtime state of the virtual queue for one run."""

    uses_dummies = True

    def __init__(self, spec: PolicySpec, graph: BipartiteGraph):
        super().__init__(spec, graph)
        if spec.vq is None:
            raise ConfigError("virtual-queue policy needs VQ parameters", field="policy.b_n")
        self.params = spec.vq
        self.s = spec.vq.slot_length
        self.forming: List["Job"] = []
        self.fifo: Deque[Batch] = deque()
        self.head: Optional[Batch] = None
        self.batches: List[Batch] = []
        self._held = 0
        self.dummies_issued = 0

    def attach(self, sim: "Simulation") -> None:
        isolated = self.graph.isolated_queues()
        if isolated:
            raise ConfigError(
                f"queues {[i + 1 for i in isolated]} have no servers; batch fallback would never finish",
                field="topology",
            )
        logger.debug(
            f"virtual queue: batch_jobs={self.params.batch_jobs} slot={self.s:.6g} b_n={self.params.b_n:.6g}"
        )
        sim.schedule(0.0, BOUNDARY, 0)

    def backlog(self) -> int:
        return self._held

    # ========== ARRIVALS ==========

    def on_arrival(self, sim: "Simulation", job: "Job") -> None:
        self.forming.append(job)
        self._held += 1
        if len(self.forming) == self.params.batch_jobs:
            self._close_batch(sim.clock)

    def on_horizon(self, sim: "Simulation") -> None:
        if self.forming:
            self._close_batch(sim.clock, partial=True)

    def _close_batch(self, t: float, partial: bool = False) -> None:
        batch = Batch(index=len(self.batches), jobs=self.forming, formation_time=t, partial=partial)
        self.forming = []
        self.batches.append(batch)
        self.fifo.append(batch)

    # ========== SERVERS ==========

    def _assign(self, sim: "Simulation", batch: Batch, pos: int, server: int) -> None:
        sim.start_service(server, batch.jobs[pos])
        self._held -= 1
        batch.last_assign_time = sim.clock

    def _fallback_pick(self, batch: Batch, server: int) -> Optional[int]:
        """Lowest unassigned job position whose queue connects to `server`."""
        for idx, pos in enumerate(batch.unassigned):
            if self.graph.has_edge(batch.jobs[pos].queue_id, server):
                del batch.unassigned[idx]
                return pos
        return None

    def on_completion(self, sim: "Simulation", server: int, job: "Job") -> None:
        head = self.head
        if head is not None and head.state is BatchState.FALLBACK and head.unassigned:
            pos = self._fallback_pick(head, server)
            if pos is not None:
                self._assign(sim, head, pos, server)
        # otherwise the server idles until the next boundary

    # ========== SLOT BOUNDARIES ==========

    def on_timer(self, sim: "Simulation", key: str, payload: Any) -> None:
        if key != BOUNDARY:
            return
        slot = payload
        self._boundary(sim)
        if not (sim.arrivals_stopped and sim.pending_real == 0):
            sim.schedule((slot + 1) * self.s, BOUNDARY, slot + 1)

    def _boundary(self, sim: "Simulation") -> None:
        t = sim.clock
        if self.head is None and self.fifo:
            # formed during the slot that just ended, into an empty virtual queue
            first = self.fifo.popleft()
            self._begin(first, first.formation_time)

        vq_empty = self.head is None
        departed = False
        head = self.head

        if head is not None and head.state is BatchState.IN_SERVICE:
            idle = sim.state.idle_servers()
            assignment = find_batch_assignment(self.graph, [job.queue_id for job in head.jobs], idle)
            if assignment is not None:
                for pos in sorted(assignment):
                    self._assign(sim, head, pos, assignment[pos])
                self._depart(head, t)
                departed = True
            else:
                head.state = BatchState.FALLBACK
                head.long_service = True
                head.unassigned = list(range(len(head.jobs)))
                for server in idle:
                    pos = self._fallback_pick(head, server)
                    if pos is not None:
                        self._assign(sim, head, pos, server)

        elif head is not None and head.state is BatchState.FALLBACK and not head.unassigned:
            self._depart(head, t)
            departed = True

        if self.head is None and self.fifo:
            # queued behind the batch that just left; matched at the next boundary
            self._begin(self.fifo.popleft(), t)

        if departed or vq_empty:
            # dummies only while no batch is mid-fallback
            for server in sim.state.idle_servers():
                sim.start_dummy(server)
                self.dummies_issued += 1

    def _begin(self, batch: Batch, start: float) -> None:
        batch.state = BatchState.IN_SERVICE
        batch.start_time = start
        self.head = batch

    def _depart(self, batch: Batch, t: float) -> None:
        batch.departure_time = t
        batch.state = BatchState.DEPARTED
        self.head = None

    # ========== DIAGNOSTICS ==========

    def diagnostics(self, sim: "Simulation") -> Dict[str, Any]:
        window_start = sim.window_start
        measured = [b for b in self.batches if b.formation_time >= window_start and not b.partial]
        departed = [b for b in measured if b.departure_time is not None]

        gaps = [
            b.formation_time - self.batches[b.index - 1].formation_time
            for b in measured
            if b.index > 0
        ]
        waits = [b.start_time - b.formation_time for b in departed]
        services = [
            self.s * math.ceil((b.departure_time - b.start_time) / self.s - 1e-9)
            for b in departed
        ]

        out: Dict[str, Any] = {
            "jobs": self.params.batch_jobs,
            "b_n": self.params.b_n,
            "slot_length": self.s,
            "count": len(departed),
            "long_fraction": (sum(b.long_service for b in departed) / len(departed)) if departed else 0.0,
            "dummies": self.dummies_issued,
            "gap_lower": self.params.b_n / self.params.n,
            "gap_upper": self.params.rho / (1 - self.params.rho) * self.params.b_n / self.params.n,
        }
        out.update(_moments("gap", gaps))
        out.update(_moments("wait", waits))
        out.update(_moments("service", services))
        if waits:
            out["wait_stderr"] = float(np.std(waits, ddof=1) / math.sqrt(len(waits))) if len(waits) > 1 else 0.0

        gap_mean = out.get("gap_mean", 0.0)
        if gaps and services and gap_mean > 0:
            rho_tilde = out["service_mean"] / gap_mean
            out["rho_tilde"] = rho_tilde
            out["lambda_tilde"] = 1 / gap_mean
            out["kingman"] = (
                kingman_bound(1 / gap_mean, out["gap_var"], out["service_var"], rho_tilde)
                if rho_tilde < 1
                else math.inf
            )
        return {f"batch_{key}": value for key, value in out.items()}

    def batch_log(self) -> List[Dict[str, Any]]:
        return [
            {
                "index": b.index,
                "jobs": len(b.jobs),
                "formation_time": b.formation_time,
                "start_time": b.start_time,
                "departure_time": b.departure_time,
                "last_assign_time": b.last_assign_time,
                "long": b.long_service,
            }
            for b in self.batches
        ]


def _moments(prefix: str, values: List[float]) -> Dict[str, float]:
    if not values:
        return {}
    arr = np.asarray(values, dtype=float)
    return {
        f"{prefix}_mean": float(arr.mean()),
        f"{prefix}_var": float(arr.var(ddof=1)) if arr.size > 1 else 0.0,
    }
