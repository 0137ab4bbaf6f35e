"""
flexsim Study Output

CSV rows per replicate plus one aggregate row per study, and the gnuplot
columns file for the delay-vs-n plot.
"""

import csv
import io
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from ..sim.model import SimResult
from .study import StudyResult

logger = logging.getLogger(__name__)


CSV_COLUMNS = (
    "scenario",
    "n",
    "d",
    "policy",
    "size_dist",
    "replicate",
    "seed",
    "jobs",
    "mean_wait",
    "p25",
    "median",
    "p75",
    "frac_long_service",
    "batch_wait_mean",
    "kingman_bound",
)
AGGREGATE = "all"
GNUPLOT_COLUMNS = ("n", "d", "size_dist", "p25", "median", "p75")

_INT_COLUMNS = {"n", "jobs", "seed"}
_TEXT_COLUMNS = {"scenario", "policy", "size_dist", "replicate"}


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _mean(values: Iterable[Optional[float]]) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def _replicate_row(study: StudyResult, k: int, res: SimResult) -> Dict[str, Any]:
    diag = res.diagnostics
    return {
        "scenario": study.scenario,
        "n": study.n,
        "d": study.d,
        "policy": study.policy,
        "size_dist": study.size_dist,
        "replicate": k + 1,
        "seed": res.seed,
        "jobs": res.jobs_measured,
        "mean_wait": res.weighted_mean_wait,
        "frac_long_service": diag.get("batch_long_fraction"),
        "batch_wait_mean": diag.get("batch_wait_mean"),
        "kingman_bound": diag.get("batch_kingman"),
    }


def study_rows(study: StudyResult) -> List[Dict[str, Any]]:
    """Replicate rows in replicate order, then the aggregate row."""
    rows = [_replicate_row(study, k, res) for k, res in enumerate(study.replicates)]
    if not rows:
        return rows
    rows.append(
        {
            "scenario": study.scenario,
            "n": study.n,
            "d": study.d,
            "policy": study.policy,
            "size_dist": study.size_dist,
            "replicate": AGGREGATE,
            "seed": study.base_seed,
            "jobs": study.jobs,
            "mean_wait": _mean(r["mean_wait"] for r in rows),
            "p25": study.p25,
            "median": study.median,
            "p75": study.p75,
            "frac_long_service": _mean(r["frac_long_service"] for r in rows),
            "batch_wait_mean": _mean(r["batch_wait_mean"] for r in rows),
            "kingman_bound": _mean(r["kingman_bound"] for r in rows),
        }
    )
    return rows


def format_csv(studies: Union[StudyResult, Iterable[StudyResult]]) -> str:
    if isinstance(studies, StudyResult):
        studies = [studies]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for study in studies:
        for row in study_rows(study):
            writer.writerow([_fmt(row.get(col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def emit_csv(studies: Union[StudyResult, Iterable[StudyResult]], path: Union[str, Path]) -> None:
    """Write the study CSV; an empty study gives a header-only file."""
    text = format_csv(studies)
    Path(path).write_text(text, encoding="utf-8")
    logger.debug(f"wrote {text.count(chr(10)) - 1} CSV rows to {path}")


def _parse_value(column: str, raw: str) -> Any:
    if raw == "":
        return None
    if column in _TEXT_COLUMNS:
        if column == "replicate" and raw != AGGREGATE:
            return int(raw)
        return raw
    if column in _INT_COLUMNS:
        return int(raw)
    return float(raw)


def parse_csv(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Rows of a study CSV with numeric columns converted back."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        return [{col: _parse_value(col, row[col]) for col in reader.fieldnames or ()} for row in reader]


def write_gnuplot(studies: Iterable[StudyResult], path: Union[str, Path]) -> None:
    """Whitespace-separated columns, one line per study, `#` header."""
    lines = ["# " + " ".join(GNUPLOT_COLUMNS)]
    for s in studies:
        if not s.replicates:
            continue
        lines.append(" ".join(_fmt(v) for v in (s.n, s.d, s.size_dist, s.p25, s.median, s.p75)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
