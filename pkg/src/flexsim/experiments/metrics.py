"""
flexsim Study Metrics

Prometheus collectors for study runs, kept in a per-study registry and
written as a textfile for node-exporter style scraping.
"""

import logging
from pathlib import Path
from typing import Optional, Union

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

from ..sim.model import SimResult

logger = logging.getLogger(__name__)


WAIT_BUCKETS = (0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0, float("inf"))


class StudyMetrics:
    """Jobs simulated, replicate mean waits and long-service fraction per scenario."""

    def __init__(self, registry: Optional[CollectorRegistry] = None):
        self.registry = registry or CollectorRegistry()
        self.jobs = Counter(
            "flexsim_jobs_measured",
            "Measured real jobs across replicates",
            ["scenario"],
            registry=self.registry,
        )
        self.mean_wait = Histogram(
            "flexsim_replicate_mean_wait",
            "Rate-weighted mean wait of each replicate",
            ["scenario"],
            buckets=WAIT_BUCKETS,
            registry=self.registry,
        )
        self.long_fraction = Gauge(
            "flexsim_long_service_fraction",
            "Fraction of batches with service longer than one slot (last replicate)",
            ["scenario"],
            registry=self.registry,
        )
        self.unstable = Counter(
            "flexsim_unstable_replicates",
            "Replicates truncated by the instability threshold",
            ["scenario"],
            registry=self.registry,
        )

    def observe(self, scenario: str, result: SimResult) -> None:
        self.jobs.labels(scenario=scenario).inc(result.jobs_measured)
        self.mean_wait.labels(scenario=scenario).observe(result.weighted_mean_wait)
        frac = result.diagnostics.get("batch_long_fraction")
        if frac is not None:
            self.long_fraction.labels(scenario=scenario).set(frac)
        if result.unstable:
            self.unstable.labels(scenario=scenario).inc()

    def write(self, path: Union[str, Path]) -> None:
        write_to_textfile(str(path), self.registry)
        logger.debug(f"wrote study metrics to {path}")
