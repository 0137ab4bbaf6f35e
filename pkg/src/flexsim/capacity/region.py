"""
flexsim Capacity Region

Feasibility of arrival rate vectors on a flexibility architecture, the
exhaustive Hall oracle, and the adversarial / augmented rate constructions.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigError, DomainError, VerificationTooLargeError
from ..rng import RATES, TOPOLOGY, substream
from ..topology.builders import build_modular, random_partition
from ..topology.graph import BipartiteGraph, ClusterPartition
from .flows import queue_node, solve_max_flow

logger = logging.getLogger(__name__)


VERDICT_TOL = 1e-9
MAX_ORACLE_QUEUES = 20


# ========== RATE TYPES ==========

@dataclass(frozen=True)
class RateVector:
    """Per-queue arrival rates, non-negative and finite."""
    rates: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(x) for x in self.rates)
        for i, x in enumerate(values):
            if not math.isfinite(x) or x < 0:
                raise DomainError(f"rate of queue {i + 1} must be finite and >= 0, got {x}")
        object.__setattr__(self, "rates", values)

    @classmethod
    def of(cls, values: Union["RateVector", Iterable[float]]) -> "RateVector":
        if isinstance(values, RateVector):
            return values
        return cls(tuple(values))

    def __len__(self) -> int:
        return len(self.rates)

    def __getitem__(self, i: int) -> float:
        return self.rates[i]

    def __iter__(self) -> Iterator[float]:
        return iter(self.rates)

    @property
    def total(self) -> float:
        return math.fsum(self.rates)

    @property
    def maximum(self) -> float:
        return max(self.rates, default=0.0)

    def scaled(self, t: float) -> "RateVector":
        return RateVector(tuple(x * t for x in self.rates))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rates, dtype=float)


RatesLike = Union[RateVector, Sequence[float]]


@dataclass(frozen=True)
class RateClass:
    """Lambda_n(u): max rate below u and total rate at most rho*n."""
    n: int
    u: float
    rho: float

    def __post_init__(self):
        if self.u <= 0:
            raise DomainError(f"u must be > 0, got {self.u}")
        if not 0 < self.rho < 1:
            raise DomainError(f"rho must be in (0, 1), got {self.rho}")


class Verdict(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    BOUNDARY = "Boundary"


@dataclass
class FeasibilityResult:
    """
    Verdict plus certificate.

    Feasible results carry `flow` (edge -> f_ij, 0-based ids). Infeasible and
    Boundary results carry `subset` with its rate sum and |N(S)|.
    """
    verdict: Verdict
    total_rate: float
    max_flow: float
    slack: float
    flow: Optional[Dict[Tuple[int, int], float]] = None
    subset: Optional[Tuple[int, ...]] = None
    subset_rate: float = 0.0
    neighborhood_size: int = 0
    server_loads: List[float] = field(default_factory=list)

    @property
    def is_feasible(self) -> bool:
        return self.verdict is Verdict.FEASIBLE

    def to_dict(self) -> Dict[str, Any]:
        """Structured, 1-indexed form for printing."""
        out: Dict[str, Any] = {
            "verdict": self.verdict.value,
            "total_rate": self.total_rate,
            "max_flow": self.max_flow,
            "slack": self.slack,
        }
        if self.subset is not None:
            out["subset"] = [i + 1 for i in self.subset]
            out["subset_rate"] = self.subset_rate
            out["neighborhood_size"] = self.neighborhood_size
        if self.flow is not None:
            out["max_server_load"] = max(self.server_loads, default=0.0)
            out["flow"] = {f"{i + 1},{j + 1}": f for (i, j), f in sorted(self.flow.items())}
        return out


def _check_lengths(g: BipartiteGraph, lam: RateVector) -> None:
    if len(lam) != g.n_queues:
        raise DomainError(f"rate vector has {len(lam)} entries, graph has {g.n_queues} queues")


# ========== CHECKS ==========

def rate_condition_check(lam: RatesLike, rc: RateClass) -> bool:
    """True iff max rate < u and total rate <= rho*n."""
    lam = RateVector.of(lam)
    if len(lam) != rc.n:
        raise DomainError(f"rate vector has {len(lam)} entries, class is for n={rc.n}")
    return lam.maximum < rc.u and lam.total <= rc.rho * rc.n + VERDICT_TOL


def _interior_flow(g: BipartiteGraph, lam: RateVector):
    """A full flow with every server load strictly below 1, if one is found."""
    total = lam.total
    delta = 0.5
    for _ in range(40):
        sol = solve_max_flow(g, lam.rates, 1.0 - delta)
        if sol.value >= total - VERDICT_TOL:
            return sol
        delta /= 2
    return None


def is_feasible(
    g: BipartiteGraph,
    lam: RatesLike,
    slack: float = 0.0,
    want_flow: bool = True,
) -> FeasibilityResult:
    """
    Decide whether `lam` lies in the capacity region of `g`.

    Runs max-flow with server capacity 1 - slack. Infeasible results carry the
    source side of the min cut. With slack 0 a full flow that forces some
    server to saturation is reported as Boundary with the maximal tight set.
    """
    lam = RateVector.of(lam)
    _check_lengths(g, lam)
    if not 0 <= slack < 1:
        raise DomainError(f"slack must be in [0, 1), got {slack}")

    capacity = 1.0 - slack
    total = lam.total
    sol = solve_max_flow(g, lam.rates, capacity)

    if sol.value < total - VERDICT_TOL:
        reached = sol.reachable_from_source(VERDICT_TOL)
        subset = tuple(i for i in range(g.n_queues) if queue_node(i) in reached)
        nbrs = g.neighborhood(subset)
        return FeasibilityResult(
            verdict=Verdict.INFEASIBLE,
            total_rate=total,
            max_flow=sol.value,
            slack=slack,
            subset=subset,
            subset_rate=math.fsum(lam[i] for i in subset),
            neighborhood_size=len(nbrs),
        )

    if slack == 0:
        # queues that cannot push more flow to the sink form a saturated set
        reaching = sol.reaching_sink(VERDICT_TOL)
        tight = tuple(i for i in range(g.n_queues) if queue_node(i) not in reaching)
        if any(lam[i] > VERDICT_TOL for i in tight):
            return FeasibilityResult(
                verdict=Verdict.BOUNDARY,
                total_rate=total,
                max_flow=sol.value,
                slack=slack,
                subset=tight,
                subset_rate=math.fsum(lam[i] for i in tight),
                neighborhood_size=len(g.neighborhood(tight)),
            )
        if want_flow:
            sol = _interior_flow(g, lam) or sol

    return FeasibilityResult(
        verdict=Verdict.FEASIBLE,
        total_rate=total,
        max_flow=sol.value,
        slack=slack,
        flow=dict(sol.edge_flows) if want_flow else None,
        server_loads=list(sol.server_loads) if want_flow else [],
    )


def hall_oracle(g: BipartiteGraph, lam: RatesLike) -> bool:
    """
    Exhaustive check of sum_{i in S} lam_i < |N(S)| over every nonempty S.

    Only positive-rate queues are enumerated; adding a zero-rate queue to S
    never lowers |N(S)|. Refuses graphs with more than 20 queues.
    """
    lam = RateVector.of(lam)
    _check_lengths(g, lam)
    if g.n_queues > MAX_ORACLE_QUEUES:
        raise VerificationTooLargeError(g.n_queues, MAX_ORACLE_QUEUES)

    masks = g.neighbor_masks()
    support = [i for i in range(g.n_queues) if lam[i] > 0]
    m = len(support)
    nbr = [0] * (1 << m)
    sums = [0.0] * (1 << m)
    for mask in range(1, 1 << m):
        low = mask & -mask
        k = low.bit_length() - 1
        prev = mask ^ low
        nbr[mask] = nbr[prev] | masks[support[k]]
        sums[mask] = sums[prev] + lam[support[k]]
        if sums[mask] >= nbr[mask].bit_count() - VERDICT_TOL:
            return False
    return True


def modular_cluster_loads(partition: ClusterPartition, lam: RatesLike) -> List[float]:
    """Sum of arrival rates per queue cluster."""
    lam = RateVector.of(lam)
    if len(lam) != partition.n:
        raise DomainError(f"rate vector has {len(lam)} entries, partition has {partition.n} queues")
    loads = [0.0] * partition.num_clusters
    for i, c in enumerate(partition.queue_cluster):
        loads[c] += lam[i]
    return loads


# ========== CONSTRUCTIONS ==========

def adversarial_modular_rates(n: int, d: int, u: float, rho: float) -> RateVector:
    """Rate min(2, (1+u)/2) on the first d queues, zero elsewhere."""
    if u <= 1:
        raise DomainError(f"u must be > 1, got {u}")
    if not 0 < rho < 1:
        raise DomainError(f"rho must be in (0, 1), got {rho}")
    if d < 1 or d > rho * n / 2:
        raise DomainError(f"need 1 <= d <= rho*n/2 = {rho * n / 2}, got d={d}")
    value = min(2.0, (1 + u) / 2)
    return RateVector(tuple(value if i < d else 0.0 for i in range(n)))


def augment_rates(lam: RatesLike, rho: float) -> Tuple[RateVector, float]:
    """
    Add a dummy stream of rate 1 - rho' to every queue, rho' = (1 + rho)/2.

    The augmented vector has total rate between (1 - rho')n and rho'n.
    """
    lam = RateVector.of(lam)
    if not 0 < rho < 1:
        raise DomainError(f"rho must be in (0, 1), got {rho}")
    n = len(lam)
    if lam.total > rho * n + VERDICT_TOL:
        logger.warning(f"total rate {lam.total:.6g} exceeds rho*n = {rho * n:.6g}; augmented load may exceed rho'")
    rho_prime = (1 + rho) / 2
    extra = 1 - rho_prime
    return RateVector(tuple(x + extra for x in lam)), rho_prime


# ========== SAMPLERS ==========

class RateSampler(Protocol):
    def __call__(self, n: int, rng: np.random.Generator) -> RateVector: ...


@dataclass(frozen=True)
class UniformRates:
    """Every queue at the same rate."""
    value: float

    def __call__(self, n: int, rng: np.random.Generator) -> RateVector:
        return RateVector((self.value,) * n)


@dataclass(frozen=True)
class FixedRates:
    vector: Tuple[float, ...]

    def __call__(self, n: int, rng: np.random.Generator) -> RateVector:
        if len(self.vector) != n:
            raise DomainError(f"fixed rate vector has {len(self.vector)} entries, need {n}")
        return RateVector(self.vector)


@dataclass(frozen=True)
class RateClassSampler:
    """Uniform draws on [0, u), rescaled so the total stays within rho*n."""
    u: float
    rho: float

    def __call__(self, n: int, rng: np.random.Generator) -> RateVector:
        draws = rng.random(n) * self.u
        total = float(draws.sum())
        budget = self.rho * n
        if total > budget:
            draws *= budget / total
        return RateVector(tuple(draws.tolist()))


@dataclass(frozen=True)
class SparseBernoulliRates:
    """
    Rate v with probability rho/(v(1+epsilon)), else 0.

    A draw whose total exceeds rho*n is replaced by the zero vector.
    """
    v: float
    rho: float
    epsilon: float = 0.1

    def __call__(self, n: int, rng: np.random.Generator) -> RateVector:
        p = min(1.0, self.rho / (self.v * (1 + self.epsilon)))
        on = rng.random(n) < p
        rates = np.where(on, self.v, 0.0)
        if rates.sum() > self.rho * n:
            rates = np.zeros(n)
        return RateVector(tuple(rates.tolist()))


# ========== MONTE CARLO ==========

def _feasibility_trial(n: int, d: int, sampler: RateSampler, seed: int, trial: int) -> bool:
    partition = random_partition(n, d, substream(seed, trial, TOPOLOGY))
    graph = build_modular(n, d, partition)
    lam = sampler(n, substream(seed, trial, RATES))
    return is_feasible(graph, lam, slack=0.0, want_flow=False).is_feasible


def _trial_chunk(args: Tuple[int, int, RateSampler, int, List[int]]) -> int:
    n, d, sampler, seed, trials = args
    return sum(_feasibility_trial(n, d, sampler, seed, t) for t in trials)


def estimate_feasibility_probability(
    n: int,
    d: int,
    rate_sampler: RateSampler,
    trials: int,
    seed: int = 0,
    workers: int = 1,
) -> float:
    """
    Fraction of (random modular graph, sampled rates) pairs that are Feasible.

    Trial t draws its partition and its rates from substreams keyed by t, so
    the estimate does not depend on how trials are split across workers.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if d < 1 or n % d != 0:
        raise DomainError(f"d={d} must divide n={n}")

    if workers <= 1 or trials < 2:
        hits = _trial_chunk((n, d, rate_sampler, seed, list(range(trials))))
    else:
        chunks = [list(range(trials))[w::workers] for w in range(workers)]
        jobs = [(n, d, rate_sampler, seed, c) for c in chunks if c]
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            hits = sum(pool.map(_trial_chunk, jobs))

    logger.debug(f"feasibility estimate n={n} d={d}: {hits}/{trials}")
    return hits / trials


# ========== RATE FILES ==========

def format_rates(lam: RatesLike) -> str:
    return "".join(f"{x:.12g}\n" for x in RateVector.of(lam))


def parse_rates(text: str) -> RateVector:
    values = []
    for lineno, ln in enumerate(text.splitlines(), start=1):
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        try:
            values.append(float(ln))
        except ValueError:
            raise ConfigError(f"line {lineno}: not a number: {ln!r}")
    try:
        return RateVector(tuple(values))
    except DomainError as e:
        raise ConfigError(str(e))


def write_rates(lam: RatesLike, path: Union[str, Path]) -> None:
    Path(path).write_text(format_rates(lam), encoding="utf-8")


def read_rates(path: Union[str, Path]) -> RateVector:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"rates file not found: {p}")
    return parse_rates(p.read_text(encoding="utf-8"))
