"""
flexsim Experiments

Scenario files, replicated studies, CSV/gnuplot output and study metrics.
"""

from .metrics import StudyMetrics
from .output import AGGREGATE, CSV_COLUMNS, emit_csv, format_csv, parse_csv, study_rows, write_gnuplot
from .scenario import Scenario, load_scenario, scenario_from_dict
from .study import StudyResult, figure_degree, figure_scenario, nearest_rank, reproduce_figure, run_study

__all__ = [
    # Scenarios
    "Scenario",
    "load_scenario",
    "scenario_from_dict",
    # Studies
    "StudyResult",
    "figure_degree",
    "figure_scenario",
    "nearest_rank",
    "reproduce_figure",
    "run_study",
    # Output
    "AGGREGATE",
    "CSV_COLUMNS",
    "emit_csv",
    "format_csv",
    "parse_csv",
    "study_rows",
    "write_gnuplot",
    "StudyMetrics",
]
