"""
flexsim Simulation Engine

Continuous-time discrete-event loop for one run.

Events at equal times are ordered completions, then timers and slot
boundaries, then arrivals; within a rank by server/queue index. Arrivals are
one superposed Poisson stream held outside the heap and processed only when
strictly earlier than the next heap event.
"""

import heapq
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Deque, List, Optional, Sequence, Tuple, Union

from ..capacity.region import RateVector, augment_rates
from ..config import get_settings
from ..errors import AuditError, SimulationError
from ..policies.base import Policy, PolicySpec
from ..rng import ARRIVALS, DUMMY_SIZES, JOB_SIZES, POLICY, ROUTING, choice_stream, exponential_stream, substream
from ..topology.graph import BipartiteGraph
from .model import Horizon, Job, JobSizeDist, QueueStats, SimResult, new_queues, size_stream, weighted_mean_wait
from .trace import TraceWriter

logger = logging.getLogger(__name__)


COMPLETION_RANK = 0
TIMER_RANK = 1

COMPLETION = "completion"
HORIZON = "horizon"
ARRIVAL = "arrival"

Audit = Callable[["Simulation", str], None]


@dataclass
class SimState:
    """
    Mutable run state.

    `server_job[j]` is the job in service at server j, None when Idle.
    `events` is a heap of (time, rank, entity, seq, kind, payload).
    """
    clock: float
    queues: List[Deque[Job]]
    server_job: List[Optional[Job]]
    completion_time: List[float]
    events: List[Tuple[float, int, int, int, str, Any]] = field(default_factory=list)
    policy_state: Any = None

    def idle_servers(self) -> List[int]:
        return [j for j, job in enumerate(self.server_job) if job is None]

    def is_idle(self, j: int) -> bool:
        return self.server_job[j] is None


class Simulation:
    """One run of a policy on a graph under Poisson arrivals."""

    def __init__(
        self,
        graph: BipartiteGraph,
        lam: Union[RateVector, Sequence[float]],
        policy: PolicySpec,
        size_dist: JobSizeDist,
        horizon: Horizon,
        seed: int = 0,
        max_queue: Optional[int] = None,
        audits: Sequence[Audit] = (),
        trace_path: Optional[Union[str, Path]] = None,
    ):
        self.graph = graph
        self.lam = RateVector.of(lam)
        if len(self.lam) != graph.n_queues:
            raise SimulationError(f"rate vector has {len(self.lam)} entries, graph has {graph.n_queues} queues")
        self.spec = policy
        self.size_dist = size_dist
        self.horizon = horizon
        self.seed = seed
        self.max_queue = max_queue if max_queue is not None else get_settings().max_queue
        self.audits = list(audits)

        n = graph.n_queues
        self.state = SimState(
            clock=0.0,
            queues=new_queues(n),
            server_job=[None] * graph.n_servers,
            completion_time=[math.inf] * graph.n_servers,
        )
        self.prev_clock = 0.0
        self._seq = 0

        # horizon in time units
        burn_in = horizon.default_burn_in()
        if horizon.kind == "slots":
            s = policy.slot_length
            if s is None:
                raise SimulationError("a slot horizon needs a slotted policy")
            self.stop_time = horizon.value * s
            self.burn_in_time = burn_in * s
        elif horizon.kind == "time":
            self.stop_time = horizon.value
            self.burn_in_time = burn_in
        else:
            self.stop_time = math.inf
            self.burn_in_time = math.inf
        self.job_limit = int(horizon.value) if horizon.kind == "jobs" else None
        self.burn_in_jobs = int(burn_in) if horizon.kind == "jobs" else 0

        # arrival streams
        total = self.lam.total
        self._real_gap = exponential_stream(substream(seed, ARRIVALS), 1.0 / total) if total > 0 else None
        self._real_route = choice_stream(substream(seed, ROUTING), self.lam.as_array(), n) if total > 0 else None
        self.policy: Policy = policy.create(graph)
        self.dummy_rates: Optional[RateVector] = None
        self._dummy_gap = None
        self._dummy_route = None
        if policy.augment and not self.policy.uses_dummies:
            logger.debug(f"policy {policy.kind} does not use dummy jobs; no dummy arrival streams")
        elif policy.augment:
            augmented, _ = augment_rates(self.lam, policy.rho)
            self.dummy_rates = RateVector(tuple(a - b for a, b in zip(augmented, self.lam)))
            self._dummy_gap = exponential_stream(substream(seed, ARRIVALS, 1), 1.0 / self.dummy_rates.total)
            self._dummy_route = choice_stream(substream(seed, ROUTING, 1), None, n)

        self._sizes = size_stream(size_dist, substream(seed, JOB_SIZES))
        self._arrival_dummy_sizes = size_stream(size_dist, substream(seed, DUMMY_SIZES, 1))
        self._boundary_dummy_sizes = exponential_stream(substream(seed, DUMMY_SIZES))
        self.policy_rng = substream(seed, POLICY)

        # counters
        self.queue_stats = [QueueStats() for _ in range(n)]
        self.arrived = 0
        self.pending_real = 0
        self.in_system = 0
        self.dummy_jobs = 0
        self.events = 0
        self.arrivals_stopped = False
        self.unstable = False
        self.truncation_time: Optional[float] = None
        self._wait_sq = 0.0
        self._window_start = self.burn_in_time
        self._window_end: Optional[float] = None
        self._area = 0.0
        self._area_clock = 0.0

        self.trace_path = trace_path
        self.trace: Optional[TraceWriter] = None

    # ========== POLICY INTERFACE ==========

    @property
    def clock(self) -> float:
        return self.state.clock

    @property
    def window_start(self) -> float:
        """Start of the measurement window; infinite until it is known."""
        return self._window_start

    def schedule(self, time: float, key: str, payload: Any = None, entity: int = 0) -> None:
        """Timer or slot-boundary event at `time`."""
        if time < self.state.clock:
            raise SimulationError(f"timer {key} scheduled in the past ({time} < {self.state.clock})")
        self._push(time, TIMER_RANK, entity, key, payload)

    def start_service(self, server: int, job: Job) -> None:
        """Bind `job` to Idle `server`; the size is drawn now."""
        if self.state.server_job[server] is not None:
            raise SimulationError(f"server {server + 1} is busy")
        if job.queue_id >= 0 and not self.graph.has_edge(job.queue_id, server):
            raise SimulationError(f"queue {job.queue_id + 1} is not connected to server {server + 1}")

        t = self.state.clock
        job.service_start_time = t
        if job.size is None:
            job.size = self._arrival_dummy_sizes.next() if job.is_dummy else self._sizes.next()
        self.state.server_job[server] = job
        self.state.completion_time[server] = t + job.size
        self._push(t + job.size, COMPLETION_RANK, server, COMPLETION, None)

        if job.is_dummy:
            self.dummy_jobs += 1
        else:
            self.pending_real -= 1
            if job.measured:
                stats = self.queue_stats[job.queue_id]
                wait = t - job.arrival_time
                stats.started += 1
                stats.wait_sum += wait
                self._wait_sq += wait * wait
        if self.trace:
            self.trace.write(t, "start", server + 1, job.queue_id + 1, "dummy" if job.is_dummy else "real")

    def start_dummy(self, server: int) -> None:
        """Occupy Idle `server` with a dummy job of Exp(1) duration."""
        job = Job(queue_id=-1, arrival_time=self.state.clock, is_dummy=True)
        job.size = self._boundary_dummy_sizes.next()
        self.start_service(server, job)

    # ========== EVENT LOOP ==========

    def _push(self, time: float, rank: int, entity: int, kind: str, payload: Any) -> None:
        self._seq += 1
        heapq.heappush(self.state.events, (time, rank, entity, self._seq, kind, payload))

    def _advance(self, t: float) -> None:
        """Move the clock to t, integrating real jobs in system over the window."""
        if not self.arrivals_stopped and t > self._window_start:
            start = max(self._area_clock, self._window_start)
            if t > start:
                self._area += self.in_system * (t - start)
        self._area_clock = t
        self.prev_clock = self.state.clock
        self.state.clock = t

    def _next_gap(self, stream) -> float:
        return self.state.clock + stream.next() if stream is not None else math.inf

    def _stop_arrivals(self) -> None:
        if self.arrivals_stopped:
            return
        self.arrivals_stopped = True
        self._window_end = self.state.clock
        if self.trace:
            self.trace.write(self.state.clock, HORIZON, 0)
        self.policy.on_horizon(self)

    def _arrive(self, is_dummy: bool) -> Job:
        t = self.state.clock
        if is_dummy:
            queue = int(self._dummy_route.next())
            return Job(queue_id=queue, arrival_time=t, is_dummy=True)

        queue = int(self._real_route.next())
        if self.job_limit is not None and self.arrived == self.burn_in_jobs:
            self._window_start = t
            self._area_clock = t
        measured = self.arrived >= self.burn_in_jobs if self.job_limit is not None else t >= self.burn_in_time
        self.arrived += 1
        self.pending_real += 1
        self.in_system += 1
        if measured:
            self.queue_stats[queue].arrivals += 1
        return Job(queue_id=queue, arrival_time=t, measured=measured)

    def _complete(self, server: int) -> str:
        job = self.state.server_job[server]
        self.state.server_job[server] = None
        self.state.completion_time[server] = math.inf
        if not job.is_dummy:
            self.in_system -= 1
        if self.trace:
            self.trace.write(self.state.clock, COMPLETION, server + 1)
        self.policy.on_completion(self, server, job)
        return COMPLETION

    def _over_threshold(self, queue: int) -> bool:
        return len(self.state.queues[queue]) > self.max_queue or self.policy.backlog() > self.max_queue

    def run(self) -> SimResult:
        logger.debug(f"run start: policy={self.spec.kind} n={self.graph.n_queues} seed={self.seed}")
        self.policy.attach(self)
        if math.isfinite(self.stop_time):
            self._push(self.stop_time, TIMER_RANK, -1, HORIZON, None)

        next_real = self._next_gap(self._real_gap)
        next_dummy = self._next_gap(self._dummy_gap)
        events = self.state.events

        if self.trace_path:
            self.trace = TraceWriter(self.trace_path)
        try:
            while True:
                top = events[0][0] if events else math.inf
                arrival_time = min(next_real, next_dummy)
                if not self.arrivals_stopped and arrival_time < top:
                    self._advance(arrival_time)
                    is_dummy = next_dummy < next_real
                    job = self._arrive(is_dummy)
                    if is_dummy:
                        next_dummy = self._next_gap(self._dummy_gap)
                    else:
                        next_real = self._next_gap(self._real_gap)
                    if self.trace:
                        self.trace.write(self.state.clock, ARRIVAL, job.queue_id + 1, "dummy" if is_dummy else "real")
                    self.policy.on_arrival(self, job)
                    kind = ARRIVAL
                    if self._over_threshold(job.queue_id):
                        self._truncate()
                        break
                    if self.job_limit is not None and self.arrived >= self.job_limit:
                        self._stop_arrivals()
                elif events:
                    time, _, entity, _, kind, payload = heapq.heappop(events)
                    self._advance(time)
                    if kind == COMPLETION:
                        self._complete(entity)
                    elif kind == HORIZON:
                        self._stop_arrivals()
                    else:
                        if self.trace:
                            self.trace.write(time, kind, entity)
                        self.policy.on_timer(self, kind, payload)
                else:
                    break

                self.events += 1
                for audit in self.audits:
                    audit(self, kind)
                if self.arrivals_stopped and self.pending_real == 0:
                    break

            if not self.arrivals_stopped:
                self._stop_arrivals()
        finally:
            if self.trace:
                self.trace.close()
        result = self._result()
        logger.debug(
            f"run end: policy={self.spec.kind} events={self.events} "
            f"jobs={result.jobs_measured} unstable={result.unstable}"
        )
        return result

    def _truncate(self) -> None:
        self.unstable = True
        self.truncation_time = self.state.clock
        logger.warning(
            f"queue length exceeded {self.max_queue} at t={self.state.clock:.6g}; run truncated (seed={self.seed})"
        )
        self.arrivals_stopped = True
        self._window_end = self.state.clock

    def _result(self) -> SimResult:
        end = self._window_end if self._window_end is not None else self.state.clock
        window = max(0.0, end - self._window_start) if math.isfinite(self._window_start) else 0.0
        measured = sum(q.started for q in self.queue_stats)
        wait_sum = math.fsum(q.wait_sum for q in self.queue_stats)
        mean_wait = wait_sum / measured if measured else 0.0
        stderr = 0.0
        if measured > 1:
            var = max(0.0, (self._wait_sq - measured * mean_wait ** 2) / (measured - 1))
            stderr = math.sqrt(var / measured)

        rates = [q.arrivals / window if window > 0 else 0.0 for q in self.queue_stats]
        zero = sum(rates) == 0
        weighted = weighted_mean_wait(list(zip(rates, (q.mean_wait for q in self.queue_stats))))

        return SimResult(
            seed=self.seed,
            policy=self.spec.kind,
            n_queues=self.graph.n_queues,
            n_servers=self.graph.n_servers,
            queue_stats=self.queue_stats,
            window_length=window,
            weighted_mean_wait=weighted,
            job_mean_wait=mean_wait,
            wait_stderr=stderr,
            jobs_measured=measured,
            jobs_arrived=self.arrived,
            mean_in_system=self._area / window if window > 0 else 0.0,
            mean_size=self.size_dist.mean,
            dummy_jobs=self.dummy_jobs,
            events=self.events,
            end_time=self.state.clock,
            unstable=self.unstable,
            truncation_time=self.truncation_time,
            zero_rate_warning=zero,
            unserved_jobs=self.pending_real,
            diagnostics=self.policy.diagnostics(self),
            batch_log=self.policy.batch_log(),
        )


def run(
    g: BipartiteGraph,
    lam: Union[RateVector, Sequence[float]],
    policy: PolicySpec,
    size_dist: Optional[JobSizeDist] = None,
    horizon: Optional[Horizon] = None,
    burn_in: Optional[float] = None,
    seed: int = 0,
    **kwargs: Any,
) -> SimResult:
    """
    Simulate `policy` on `g` from an empty system.

    `burn_in` overrides the horizon's own burn-in; it is in the horizon's
    unit. Extra keyword arguments go to Simulation.
    """
    size_dist = size_dist or JobSizeDist.exponential()
    horizon = horizon or Horizon.time(1000.0)
    if burn_in is not None:
        horizon = Horizon(horizon.kind, horizon.value, burn_in)
    return Simulation(g, lam, policy, size_dist, horizon, seed=seed, **kwargs).run()


# ========== AUDITS ==========

def event_order_audit(sim: Simulation, kind: str) -> None:
    """The clock never moves backwards."""
    if sim.state.clock < sim.prev_clock:
        raise AuditError(f"clock moved back from {sim.prev_clock} to {sim.state.clock} on {kind}")


def work_conservation_audit(sim: Simulation, kind: str) -> None:
    """For work-conserving policies, no Idle server has a nonempty connected queue."""
    if not sim.policy.work_conserving:
        return
    queues = sim.state.queues
    for j, job in enumerate(sim.state.server_job):
        if job is not None:
            continue
        for i in sim.graph.server_neighbors(j):
            if queues[i]:
                raise AuditError(
                    f"server {j + 1} idle while connected queue {i + 1} holds {len(queues[i])} jobs "
                    f"(t={sim.state.clock}, after {kind})"
                )
