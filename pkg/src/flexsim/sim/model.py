"""
flexsim Simulation Model

Jobs, job-size distributions, run horizons and the per-run result record.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, SimulationError
from ..rng import BufferedStream

logger = logging.getLogger(__name__)


# ========== JOBS ==========

@dataclass(slots=True)
class Job:
    """
    A unit of work at a queue.

    `size` stays None until service starts; policies never see it earlier.
    """
    queue_id: int
    arrival_time: float
    is_dummy: bool = False
    measured: bool = False
    size: Optional[float] = None
    service_start_time: Optional[float] = None

    @property
    def wait(self) -> Optional[float]:
        if self.service_start_time is None:
            return None
        return self.service_start_time - self.arrival_time


# ========== JOB SIZES ==========

SIZE_KINDS = ("exponential", "lognormal")


@dataclass(frozen=True)
class JobSizeDist:
    """Exponential(mean) or LogNormal(mean, variance) service requirement."""
    kind: str = "exponential"
    mean: float = 1.0
    variance: float = 1.0

    def __post_init__(self):
        if self.kind not in SIZE_KINDS:
            raise ConfigError(f"unknown size distribution {self.kind!r}", field="sizes.kind")
        if not self.mean > 0:
            raise ConfigError(f"mean must be > 0, got {self.mean}", field="sizes.mean")
        if self.variance < 0:
            raise ConfigError(f"variance must be >= 0, got {self.variance}", field="sizes.variance")
        if self.kind == "exponential":
            object.__setattr__(self, "variance", self.mean ** 2)

    @classmethod
    def exponential(cls, mean: float = 1.0) -> "JobSizeDist":
        return cls("exponential", mean, mean ** 2)

    @classmethod
    def lognormal(cls, mean: float = 1.0, variance: float = 10.0) -> "JobSizeDist":
        return cls("lognormal", mean, variance)

    @property
    def lognormal_params(self) -> Tuple[float, float]:
        """(mu, sigma^2) of the underlying normal, by moment inversion."""
        m, v = self.mean, self.variance
        mu = math.log(m * m / math.sqrt(v + m * m))
        sigma2 = math.log1p(v / (m * m))
        return mu, sigma2

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "exponential":
            # inverse CDF
            return -self.mean * np.log1p(-rng.random(size))
        mu, sigma2 = self.lognormal_params
        return np.exp(mu + math.sqrt(sigma2) * rng.standard_normal(size))


def sample_job_size(dist: JobSizeDist, rng: np.random.Generator) -> float:
    """One positive job size."""
    return float(dist.draw(rng, 1)[0])


def size_stream(dist: JobSizeDist, rng: np.random.Generator, block_size: int = 8192) -> BufferedStream:
    return BufferedStream(rng, dist.draw, block_size)


# ========== HORIZON ==========

HORIZON_KINDS = ("time", "slots", "jobs")


@dataclass(frozen=True)
class Horizon:
    """
    When arrivals stop: at time T, after a number of service slots, or after
    a number of real arrivals. Burn-in is given in the same unit.
    """
    kind: str
    value: float
    burn_in: Optional[float] = None

    def __post_init__(self):
        if self.kind not in HORIZON_KINDS:
            raise ConfigError(f"unknown horizon kind {self.kind!r}", field="run.horizon")
        if not self.value > 0:
            raise ConfigError(f"horizon must be > 0, got {self.value}", field="run.horizon")
        if self.burn_in is not None and not 0 <= self.burn_in < self.value:
            raise ConfigError(
                f"burn-in must be in [0, {self.value}), got {self.burn_in}",
                field="run.burn_in",
            )

    @classmethod
    def time(cls, t: float, burn_in: Optional[float] = None) -> "Horizon":
        return cls("time", t, burn_in)

    @classmethod
    def slots(cls, count: int, burn_in: Optional[float] = None) -> "Horizon":
        return cls("slots", count, burn_in)

    @classmethod
    def jobs(cls, count: int, burn_in: Optional[float] = None) -> "Horizon":
        return cls("jobs", count, burn_in)

    def default_burn_in(self) -> float:
        """1000 slots for slot horizons (at most 10% of the run), else 10% of the horizon."""
        if self.burn_in is not None:
            return self.burn_in
        if self.kind == "slots":
            return float(min(1000, math.floor(0.1 * self.value)))
        if self.kind == "jobs":
            return float(math.floor(0.1 * self.value))
        return 0.1 * self.value


# ========== RESULTS ==========

def weighted_mean_wait(per_queue: Sequence[Tuple[float, float]]) -> float:
    """
    Rate-weighted average of per-queue mean waits.

    All-zero rates give 0 and a warning.
    """
    total = math.fsum(rate for rate, _ in per_queue)
    if any(rate < 0 for rate, _ in per_queue):
        raise SimulationError("rates must be non-negative")
    if total == 0:
        logger.warning("all rates are zero; weighted mean wait defined as 0")
        return 0.0
    return math.fsum(rate * wait for rate, wait in per_queue if rate > 0) / total


@dataclass
class QueueStats:
    """Measured real jobs of one queue."""
    arrivals: int = 0
    started: int = 0
    wait_sum: float = 0.0

    @property
    def mean_wait(self) -> float:
        return self.wait_sum / self.started if self.started else 0.0


@dataclass
class SimResult:
    """
    Outcome of one run.

    Waits are recorded for real jobs arriving after the burn-in point.
    `diagnostics` holds policy counters, e.g. batch statistics for the
    virtual-queue policy.
    """
    seed: int
    policy: str
    n_queues: int
    n_servers: int
    queue_stats: List[QueueStats]
    window_length: float
    weighted_mean_wait: float
    job_mean_wait: float
    wait_stderr: float
    jobs_measured: int
    jobs_arrived: int
    mean_in_system: float
    mean_size: float
    dummy_jobs: int
    events: int
    end_time: float
    unstable: bool = False
    truncation_time: Optional[float] = None
    zero_rate_warning: bool = False
    unserved_jobs: int = 0
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    batch_log: List[Dict[str, float]] = field(default_factory=list)

    @property
    def per_queue_mean_wait(self) -> List[float]:
        return [q.mean_wait for q in self.queue_stats]

    @property
    def empirical_rates(self) -> List[float]:
        if self.window_length <= 0:
            return [0.0] * len(self.queue_stats)
        return [q.arrivals / self.window_length for q in self.queue_stats]

    @property
    def littles_law_gap(self) -> float:
        """Relative gap between time-average jobs in system and lambda*(W + E[S])."""
        rate = math.fsum(self.empirical_rates)
        predicted = rate * (self.job_mean_wait + self.mean_size)
        if predicted == 0:
            return 0.0
        return abs(self.mean_in_system - predicted) / predicted

    def to_record(self) -> Dict[str, Any]:
        """Flat key-value form; per-queue values are space-joined."""
        record: Dict[str, Any] = {
            "seed": self.seed,
            "policy": self.policy,
            "n_queues": self.n_queues,
            "n_servers": self.n_servers,
            "jobs_arrived": self.jobs_arrived,
            "jobs_measured": self.jobs_measured,
            "weighted_mean_wait": self.weighted_mean_wait,
            "job_mean_wait": self.job_mean_wait,
            "wait_stderr": self.wait_stderr,
            "window_length": self.window_length,
            "mean_in_system": self.mean_in_system,
            "dummy_jobs": self.dummy_jobs,
            "events": self.events,
            "end_time": self.end_time,
            "unstable": self.unstable,
            "truncation_time": self.truncation_time,
            "zero_rate_warning": self.zero_rate_warning,
            "unserved_jobs": self.unserved_jobs,
            "queue_arrivals": " ".join(str(q.arrivals) for q in self.queue_stats),
            "queue_mean_wait": " ".join(f"{w:.9g}" for w in self.per_queue_mean_wait),
        }
        record.update(self.diagnostics)
        return record


def format_record(record: Dict[str, Any]) -> str:
    lines = []
    for key, value in record.items():
        if isinstance(value, float):
            value = f"{value:.9g}"
        elif value is None:
            value = "-"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def new_queues(n: int) -> List[Deque[Job]]:
    return [deque() for _ in range(n)]
