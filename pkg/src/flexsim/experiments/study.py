"""
flexsim Study Runner

Replicated runs of a scenario with percentile summaries, and the scaled
reproduction of the expander delay study.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple

from ..analysis.formulas import mm1_wait, modular_cluster_wait, pooled_wait
from ..config import get_settings
from ..errors import ConfigError, DomainError
from ..rng import RATES, TOPOLOGY, derive_seed, substream
from ..sim.engine import Simulation
from ..sim.model import SimResult
from .scenario import Scenario, scenario_from_dict

if TYPE_CHECKING:
    from .metrics import StudyMetrics

logger = logging.getLogger(__name__)


FIGURE_SIZES = ("exponential", "lognormal")


def nearest_rank(values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * N)-th smallest value."""
    if not values:
        return math.nan
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100 * len(ordered)))
    return ordered[rank - 1]


@dataclass
class StudyResult:
    """Replicates of one scenario, ordered by replicate index."""
    scenario: str
    n: int
    d: Optional[float]
    policy: str
    size_dist: str
    base_seed: int
    replicates: List[SimResult] = field(default_factory=list)
    bounds: Dict[str, float] = field(default_factory=dict)

    @property
    def delays(self) -> List[float]:
        return [r.weighted_mean_wait for r in self.replicates]

    @property
    def p25(self) -> float:
        return nearest_rank(self.delays, 25)

    @property
    def median(self) -> float:
        return nearest_rank(self.delays, 50)

    @property
    def p75(self) -> float:
        return nearest_rank(self.delays, 75)

    @property
    def jobs(self) -> int:
        return sum(r.jobs_measured for r in self.replicates)

    @property
    def any_unstable(self) -> bool:
        return any(r.unstable for r in self.replicates)

    def summary(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "n": self.n,
            "d": self.d,
            "policy": self.policy,
            "size_dist": self.size_dist,
            "replications": len(self.replicates),
            "jobs": self.jobs,
            "p25": self.p25,
            "median": self.median,
            "p75": self.p75,
            "unstable": self.any_unstable,
            **{f"bound_{k}": v for k, v in self.bounds.items()},
        }


# ========== REPLICATES ==========

def _run_replicate(args: Tuple[Scenario, int, int, Optional[str]]) -> SimResult:
    scn, replicate, seed, trace_dir = args
    topology = scn.build_topology(derive_seed(seed, TOPOLOGY))
    lam = scn.build_rates(topology, substream(seed, RATES))
    policy = scn.build_policy(topology, lam)
    trace_path = None
    if trace_dir:
        trace_path = Path(trace_dir) / f"{scn.name}-rep{replicate:03d}.trace"
    sim = Simulation(
        topology.graph,
        lam,
        policy,
        scn.sizes.dist(),
        scn.run.horizon_spec(),
        seed=seed,
        max_queue=scn.run.max_queue,
        trace_path=trace_path,
    )
    return sim.run()


def _reference_bounds(scn: Scenario) -> Dict[str, float]:
    """Closed-form waits for the configurations that have one."""
    out: Dict[str, float] = {}
    r = scn.rates
    if r.kind != "uniform":
        return out
    n, fam = scn.topology.n, scn.topology.family
    try:
        if fam == "inflexible" or (fam in ("modular", "random-modular") and scn.topology.d == 1):
            out["mm1"] = mm1_wait(r.value)
        elif fam in ("modular", "random-modular") and scn.topology.d:
            d = int(scn.topology.d)
            out["modular_cluster_wait"] = modular_cluster_wait(d, r.value * d)
        elif fam == "complete":
            out["pooled_wait"] = pooled_wait(n, r.value)
    except DomainError:
        pass
    return out


def run_study(
    scn: Scenario,
    workers: Optional[int] = None,
    seeds: Optional[Sequence[int]] = None,
    trace_dir: Optional[str] = None,
    metrics: Optional["StudyMetrics"] = None,
) -> StudyResult:
    """
    Run the scenario's replications with seeds base+1 .. base+R.

    `seeds` overrides the per-replicate seeds. Replicates may run in a
    process pool capped by FLEXSIM_THREADS; results are gathered in
    replicate order, so the outcome does not depend on scheduling. When
    `metrics` is given every replicate is also observed into it.
    """
    reps = scn.run.replications
    if seeds is None:
        seeds = [scn.run.seed + k for k in range(1, reps + 1)]
    if len(seeds) != reps:
        raise ConfigError(f"need {reps} seeds, got {len(seeds)}", field="run.seed")

    settings = get_settings()
    cap = settings.threads
    trace_dir = trace_dir or settings.trace_dir
    workers = min(workers or cap, cap, reps)
    jobs = [(scn, k, seed, trace_dir) for k, seed in enumerate(seeds)]
    if workers <= 1:
        results = [_run_replicate(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replicate, jobs))

    for k, res in enumerate(results):
        logger.info(
            "replicate finished",
            extra={"scenario": scn.name, "replicate": k, "seed": res.seed, "mean_wait": res.weighted_mean_wait},
        )
        if metrics is not None:
            metrics.observe(scn.name, res)

    return StudyResult(
        scenario=scn.name,
        n=scn.topology.n,
        d=scn.topology.d,
        policy=scn.policy.kind,
        size_dist=scn.sizes.kind,
        base_seed=scn.run.seed,
        replicates=results,
        bounds=_reference_bounds(scn),
    )


# ========== FIGURE REPRODUCTION ==========

def figure_degree(n: int) -> int:
    return round(n ** (2 / 3))


def figure_scenario(
    n: int,
    rho: float = 0.5,
    replications: int = 10,
    seed: int = 0,
    size_kind: str = "exponential",
    slots: int = 10_000,
    burn_in: int = 1000,
) -> Scenario:
    """
    Random d-regular graph with d = round(n^(2/3)), all rates 0.5, the
    virtual-queue policy with b_n = n ln(n)/d, and a slot horizon.
    """
    d = figure_degree(n)
    if d < 2:
        raise DomainError(f"n={n} gives degree {d}; the figure recipe needs d >= 2")
    sizes = {"kind": size_kind, "mean": 1.0, "variance": 10.0 if size_kind == "lognormal" else 1.0}
    return scenario_from_dict(
        {
            "scenario": {"name": f"figure-n{n}-{size_kind}"},
            "topology": {"family": "regular", "n": n, "d": d},
            "rates": {"kind": "uniform", "value": 0.5},
            "policy": {"kind": "virtual-queue", "rho": rho, "b_n_mode": "figure"},
            "sizes": sizes,
            "run": {
                "horizon_kind": "slots",
                "horizon": slots,
                "burn_in": burn_in,
                "replications": replications,
                "seed": seed,
            },
        }
    )


def reproduce_figure(
    n_list: Sequence[int],
    rho: float = 0.5,
    replications: int = 10,
    seed: int = 0,
    sizes: Sequence[str] = FIGURE_SIZES,
    slots: int = 10_000,
    burn_in: int = 1000,
    workers: Optional[int] = None,
    metrics: Optional["StudyMetrics"] = None,
) -> List[StudyResult]:
    """One StudyResult per (n, size distribution), in the order given."""
    studies = []
    for size_kind in sizes:
        for n in n_list:
            scn = figure_scenario(n, rho, replications, seed, size_kind, slots, burn_in)
            study = run_study(scn, workers=workers, metrics=metrics)
            logger.info(
                f"figure n={n} d={study.d:g} sizes={size_kind}: median={study.median:.6g} "
                f"[{study.p25:.6g}, {study.p75:.6g}]"
            )
            studies.append(study)
    return studies
