"""
flexsim Simulation

Discrete-event engine, job model and run results.
"""

from .engine import (
    SimState,
    Simulation,
    event_order_audit,
    run,
    work_conservation_audit,
)
from .model import (
    Horizon,
    Job,
    JobSizeDist,
    QueueStats,
    SimResult,
    format_record,
    sample_job_size,
    size_stream,
    weighted_mean_wait,
)
from .trace import TraceWriter, read_trace

__all__ = [
    # Engine
    "SimState",
    "Simulation",
    "run",
    "event_order_audit",
    "work_conservation_audit",
    # Model
    "Horizon",
    "Job",
    "JobSizeDist",
    "QueueStats",
    "SimResult",
    "format_record",
    "sample_job_size",
    "size_stream",
    "weighted_mean_wait",
    # Trace
    "TraceWriter",
    "read_trace",
]
