"""
flexsim Analysis Formulas

Closed-form waiting times and bounds used to cross-check simulations.
All service rates are 1; times are in mean-service-time units.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, NamedTuple, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, DomainError

logger = logging.getLogger(__name__)


@dataclass
class BoundReport:
    """A named formula evaluation with its inputs and validity flags."""
    name: str
    value: float
    inputs: Dict[str, Any]
    flags: Dict[str, bool] = field(default_factory=dict)
    note: str = ""

    @property
    def valid(self) -> bool:
        return all(self.flags.values())

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"formula": self.name, "value": self.value}
        record.update(self.inputs)
        record.update(self.flags)
        if self.note:
            record["note"] = self.note
        return record


# ========== SINGLE QUEUES ==========

def mm1_wait(rho: float) -> float:
    """Expected M/M/1 waiting time rho/(1-rho)."""
    if not 0 <= rho < 1:
        raise DomainError(f"rho must be in [0, 1), got {rho}")
    return rho / (1 - rho)


def _check_load(c: int, r: float) -> None:
    if c < 1:
        raise DomainError(f"server count must be >= 1, got {c}")
    if not 0 <= r < c:
        raise DomainError(f"offered load must be in [0, {c}), got {r}")


def erlang_c(c: int, r: float) -> float:
    """
    Probability an arrival waits in an M/M/c queue with offered load r.

    Evaluated in log space so c in the thousands does not overflow.
    """
    _check_load(c, r)
    if r == 0:
        return 0.0
    log_r = math.log(r)
    log_terms = np.array([i * log_r - math.lgamma(i + 1) for i in range(c)])
    log_top = c * log_r - math.lgamma(c + 1) - math.log1p(-r / c)
    log_rest = float(np.logaddexp.reduce(log_terms))
    return math.exp(log_top - np.logaddexp(log_top, log_rest))


def erlang_c_displayed(c: int, r: float) -> float:
    """
    Erlang C with the extra 1/(c(1 - r/c)) factor in the numerator.

    Differs from erlang_c by a factor 1/(c - r); kept for side-by-side
    reporting only.
    """
    _check_load(c, r)
    return erlang_c(c, r) / (c - r)


def modular_cluster_wait(d: int, eta: float) -> float:
    """Expected wait in a d-server cluster with total arrival rate eta."""
    _check_load(d, eta)
    return erlang_c(d, eta) / (d - eta)


def pooled_wait(n: int, rho: float) -> float:
    """Fully flexible M/M/n baseline at per-server load rho."""
    if not 0 <= rho < 1:
        raise DomainError(f"rho must be in [0, 1), got {rho}")
    return modular_cluster_wait(n, rho * n)


def mmc_wait_oracle(c: int, r: float, tol: float = 1e-16) -> float:
    """
    Expected M/M/c wait from the birth-death stationary distribution.

    Sums the unnormalised state weights directly until the tail is below
    `tol` relative to the mass, then applies Little's law.
    """
    _check_load(c, r)
    if r == 0:
        return 0.0
    weights = [1.0]
    for k in range(1, c + 1):
        weights.append(weights[-1] * r / k)
    mass = math.fsum(weights)
    queue_len = 0.0
    ratio = r / c
    w = weights[c]
    k = c
    while True:
        k += 1
        w *= ratio
        mass += w
        queue_len += (k - c) * w
        if (k - c) * w < tol * mass:
            break
    return queue_len / mass / r


# ========== BATCH SYSTEM ==========

def kingman_bound(lambda_tilde: float, sigma_a2: float, sigma_s2: float, rho_tilde: float) -> float:
    """GI/GI/1 waiting bound lambda*(var_a + var_s) / (2(1 - rho))."""
    if rho_tilde >= 1:
        raise DomainError(f"Kingman bound needs rho < 1, got {rho_tilde}")
    if lambda_tilde < 0 or sigma_a2 < 0 or sigma_s2 < 0:
        raise DomainError("rates and variances must be non-negative")
    return lambda_tilde * (sigma_a2 + sigma_s2) / (2 * (1 - rho_tilde))


class BatchMoments(NamedTuple):
    mean: float
    mean_lower: float
    mean_upper: float
    variance: float


def batch_interarrival_moments(n: int, rho: float, b_n: float, sum_lambda: float) -> BatchMoments:
    """
    Moments of the time to collect rho*b_n arrivals at total rate sum_lambda.

    The gap is Erlang(rho*b_n, sum_lambda); the bounds b_n/n and
    rho/(1-rho)*b_n/n hold when (1-rho)n <= sum_lambda <= rho*n.
    """
    if sum_lambda <= 0:
        raise DomainError(f"total arrival rate must be > 0, got {sum_lambda}")
    if not 0 < rho < 1:
        raise DomainError(f"rho must be in (0, 1), got {rho}")
    if not (1 - rho) * n - 1e-9 <= sum_lambda <= rho * n + 1e-9:
        logger.warning(f"total rate {sum_lambda} outside [{(1 - rho) * n}, {rho * n}]; bounds do not apply")
    jobs = rho * b_n
    return BatchMoments(
        mean=jobs / sum_lambda,
        mean_lower=b_n / n,
        mean_upper=rho / (1 - rho) * b_n / n,
        variance=jobs / sum_lambda ** 2,
    )


def theorem1_delay_bound(n: int, d: float, c: float) -> float:
    """Scaling curve c*ln(n)/d for the expander delay guarantee."""
    if n < 2 or d < 1 or c <= 0:
        raise DomainError(f"need n >= 2, d >= 1, c > 0; got n={n}, d={d}, c={c}")
    return c * math.log(n) / d


def exponential_decay_fit(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """
    Fit y = K*exp(-b*x) by least squares on log y.

    Returns (b, R^2 of the log-linear fit).
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise DomainError("need at least two matching points")
    if np.any(y <= 0):
        raise DomainError("decay fit needs positive values")
    log_y = np.log(y)
    slope, intercept = np.polyfit(x, log_y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((log_y - fitted) ** 2))
    ss_tot = float(np.sum((log_y - log_y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), r_squared


# ========== REGISTRY ==========

def _report_mm1(rho: float) -> BoundReport:
    ok = 0 <= rho < 1
    value = mm1_wait(rho) if ok else math.inf
    return BoundReport("mm1", value, {"rho": rho}, {"rho_below_1": ok})


def _report_erlang(c: int, r: float) -> BoundReport:
    c = int(c)
    ok = 0 <= r < c
    if not ok:
        return BoundReport("erlang-c", math.inf, {"c": c, "r": r}, {"load_below_c": False})
    standard = erlang_c(c, r)
    displayed = erlang_c_displayed(c, r)
    agree = math.isclose(standard, displayed, rel_tol=1e-9, abs_tol=1e-15)
    report = BoundReport(
        "erlang-c",
        standard,
        {"c": c, "r": r},
        {"load_below_c": True},
    )
    report.note = f"displayed_form={displayed:.9g} matches_displayed={'yes' if agree else 'no'}"
    return report


def _report_erlang_displayed(c: int, r: float) -> BoundReport:
    c = int(c)
    ok = 0 <= r < c
    value = erlang_c_displayed(c, r) if ok else math.inf
    return BoundReport("erlang-c-displayed", value, {"c": c, "r": r}, {"load_below_c": ok})


def _report_cluster(d: int, eta: float) -> BoundReport:
    d = int(d)
    ok = 0 <= eta < d
    if not ok:
        return BoundReport("modular-cluster-wait", math.inf, {"d": d, "eta": eta}, {"load_below_d": False})
    value = modular_cluster_wait(d, eta)
    report = BoundReport("modular-cluster-wait", value, {"d": d, "eta": eta}, {"load_below_d": True})
    displayed = erlang_c_displayed(d, eta) / (d - eta)
    report.note = f"displayed_form={displayed:.9g} matches_displayed={'yes' if math.isclose(value, displayed) else 'no'}"
    return report


def _report_oracle(c: int, r: float) -> BoundReport:
    c = int(c)
    ok = 0 <= r < c
    value = mmc_wait_oracle(c, r) if ok else math.inf
    return BoundReport("mmc-oracle", value, {"c": c, "r": r}, {"load_below_c": ok})


def _report_pooled(n: int, rho: float) -> BoundReport:
    n = int(n)
    ok = 0 <= rho < 1
    value = pooled_wait(n, rho) if ok else math.inf
    return BoundReport("pooled-wait", value, {"n": n, "rho": rho}, {"rho_below_1": ok})


def _report_kingman(lambda_tilde: float, sigma_a2: float, sigma_s2: float, rho_tilde: float) -> BoundReport:
    ok = rho_tilde < 1
    value = kingman_bound(lambda_tilde, sigma_a2, sigma_s2, rho_tilde) if ok else math.inf
    inputs = {"lambda_tilde": lambda_tilde, "sigma_a2": sigma_a2, "sigma_s2": sigma_s2, "rho_tilde": rho_tilde}
    return BoundReport("kingman", value, inputs, {"rho_tilde_below_1": ok})


def _report_batch(n: int, rho: float, b_n: float, sum_lambda: float) -> BoundReport:
    n = int(n)
    moments = batch_interarrival_moments(n, rho, b_n, sum_lambda)
    in_range = (1 - rho) * n - 1e-9 <= sum_lambda <= rho * n + 1e-9
    report = BoundReport(
        "batch-moments",
        moments.mean,
        {"n": n, "rho": rho, "b_n": b_n, "sum_lambda": sum_lambda},
        {"load_in_range": in_range},
    )
    report.note = (
        f"mean_lower={moments.mean_lower:.9g} mean_upper={moments.mean_upper:.9g} "
        f"variance={moments.variance:.9g}"
    )
    return report


def _report_theorem1(n: int, d: float, c: float) -> BoundReport:
    return BoundReport("theorem1-delay", theorem1_delay_bound(int(n), d, c), {"n": int(n), "d": d, "c": c})


BOUNDS: Dict[str, Callable[..., BoundReport]] = {
    "mm1": _report_mm1,
    "erlang-c": _report_erlang,
    "erlang-c-displayed": _report_erlang_displayed,
    "modular-cluster-wait": _report_cluster,
    "mmc-oracle": _report_oracle,
    "pooled-wait": _report_pooled,
    "kingman": _report_kingman,
    "batch-moments": _report_batch,
    "theorem1-delay": _report_theorem1,
}


def evaluate_bound(name: str, **args: float) -> BoundReport:
    """
    Evaluate a named formula.

    Inputs outside a formula's validity range give an infinite value with the
    corresponding flag cleared instead of raising.
    """
    try:
        fn = BOUNDS[name]
    except KeyError:
        raise ConfigError(f"unknown formula {name!r}; expected one of {sorted(BOUNDS)}", field="formula")
    try:
        return fn(**args)
    except TypeError as e:
        raise ConfigError(f"bad arguments for {name}: {e}", field="args")
