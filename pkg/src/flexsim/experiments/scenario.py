"""
flexsim Scenarios

Scenario files describe one experiment: topology, rates, policy, job sizes
and the run protocol. TOML and YAML are accepted; every section is
validated and unknown keys are rejected.
"""

import logging
import tomllib
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..capacity.region import (
    RateClassSampler,
    RateVector,
    SparseBernoulliRates,
    adversarial_modular_rates,
    read_rates,
)
from ..errors import ConfigError
from ..policies.base import PolicySpec
from ..policies.factory import build_policy
from ..sim.model import Horizon, JobSizeDist
from ..topology.builders import FAMILIES, Topology, build_family
from ..topology.graph import read_graph

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScenarioMeta(_Section):
    name: str = "scenario"
    description: str = ""


class TopologySection(_Section):
    family: Literal[FAMILIES] = "regular"  # type: ignore[valid-type]
    n: int = Field(ge=1)
    d: Optional[float] = Field(default=None, gt=0)
    seed: Optional[int] = None
    cluster_degree: Optional[int] = Field(default=None, ge=1)
    graph_file: Optional[str] = None


class RatesSection(_Section):
    kind: Literal["uniform", "file", "adversarial", "rate-class", "sparse"] = "uniform"
    value: float = Field(default=0.5, ge=0)
    path: Optional[str] = None
    u: Optional[float] = Field(default=None, gt=0)
    v: Optional[float] = Field(default=None, gt=0)
    epsilon: float = Field(default=0.1, gt=0)

    @model_validator(mode="after")
    def _check_kind(self) -> "RatesSection":
        if self.kind == "file" and not self.path:
            raise ValueError("rates.kind = file needs path")
        if self.kind in ("adversarial", "rate-class") and self.u is None:
            raise ValueError(f"rates.kind = {self.kind} needs u")
        if self.kind == "sparse" and self.v is None:
            raise ValueError("rates.kind = sparse needs v")
        return self


class PolicySection(_Section):
    kind: Literal["greedy", "modular", "virtual-queue", "expanded-modular"] = "greedy"
    rho: float = Field(default=0.5, gt=0, lt=1)
    b_n_mode: Literal["theorem1", "figure", "explicit"] = "figure"
    b_n: Optional[float] = Field(default=None, gt=0)
    augment: bool = False


class SizesSection(_Section):
    kind: Literal["exponential", "lognormal"] = "exponential"
    mean: float = Field(default=1.0, gt=0)
    variance: float = Field(default=1.0, ge=0)

    def dist(self) -> JobSizeDist:
        return JobSizeDist(self.kind, self.mean, self.variance)


class RunSection(_Section):
    horizon_kind: Literal["time", "slots", "jobs"] = "time"
    horizon: float = Field(gt=0)
    burn_in: Optional[float] = Field(default=None, ge=0)
    replications: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    max_queue: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_burn_in(self) -> "RunSection":
        if self.burn_in is not None and self.burn_in >= self.horizon:
            raise ValueError("burn_in must be below horizon")
        return self

    def horizon_spec(self) -> Horizon:
        return Horizon(self.horizon_kind, self.horizon, self.burn_in)


class Scenario(_Section):
    """A validated experiment description."""
    scenario: ScenarioMeta = ScenarioMeta()
    topology: TopologySection
    rates: RatesSection = RatesSection()
    policy: PolicySection = PolicySection()
    sizes: SizesSection = SizesSection()
    run: RunSection

    @model_validator(mode="after")
    def _check_files(self) -> "Scenario":
        for label, path in (("topology.graph_file", self.topology.graph_file), ("rates.path", self.rates.path)):
            if path is not None and not Path(path).exists():
                raise ValueError(f"{label}: file not found: {path}")
        if self.run.horizon_kind == "slots" and self.policy.kind != "virtual-queue":
            raise ValueError("run.horizon_kind = slots needs the virtual-queue policy")
        return self

    @property
    def name(self) -> str:
        return self.scenario.name

    # ========== BUILDERS ==========

    def build_topology(self, seed: Optional[int]) -> Topology:
        """The scenario graph; a fixed topology.seed overrides the replicate seed."""
        top = self.topology
        if top.graph_file:
            graph = read_graph(top.graph_file)
            if graph.n_queues != top.n:
                raise ConfigError(f"graph file has {graph.n_queues} queues, scenario says {top.n}", field="topology.n")
            return Topology("file", graph)
        return build_family(
            top.family,
            top.n,
            top.d,
            seed=top.seed if top.seed is not None else seed,
            cluster_degree=top.cluster_degree,
        )

    def build_rates(self, topology: Topology, rng: np.random.Generator) -> RateVector:
        r = self.rates
        n = topology.n
        if r.kind == "uniform":
            return RateVector((r.value,) * n)
        if r.kind == "file":
            lam = read_rates(r.path)
            if len(lam) != n:
                raise ConfigError(f"rates file has {len(lam)} entries, graph has {n} queues", field="rates.path")
            return lam
        if r.kind == "adversarial":
            d = topology.partition.cluster_size if topology.partition else int(self.topology.d or 1)
            return adversarial_modular_rates(n, d, r.u, self.policy.rho)
        if r.kind == "rate-class":
            return RateClassSampler(r.u, self.policy.rho)(n, rng)
        return SparseBernoulliRates(r.v, self.policy.rho, r.epsilon)(n, rng)

    def build_policy(self, topology: Topology, lam: RateVector) -> PolicySpec:
        p = self.policy
        return build_policy(p.kind, topology, lam, p.rho, p.b_n_mode, p.b_n, p.augment)


# ========== LOADING ==========

def _error_from_validation(e: ValidationError) -> ConfigError:
    first = e.errors()[0]
    field = ".".join(str(part) for part in first.get("loc", ()))
    message = first.get("msg", str(e))
    if len(e.errors()) > 1:
        message += f" (and {len(e.errors()) - 1} more)"
    return ConfigError(message, field=field or None)


def _resolve_paths(data: Dict[str, Any], base: Path) -> None:
    for section, key in (("topology", "graph_file"), ("rates", "path")):
        block = data.get(section)
        if isinstance(block, dict) and isinstance(block.get(key), str):
            p = Path(block[key])
            if not p.is_absolute():
                block[key] = str(base / p)


def scenario_from_dict(data: Dict[str, Any], base_dir: Union[str, Path, None] = None) -> Scenario:
    """Validate a parsed scenario mapping; relative file paths resolve against base_dir."""
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a mapping of sections")
    if base_dir is not None:
        _resolve_paths(data, Path(base_dir))
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise _error_from_validation(e)


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read a .toml, .yaml or .yml scenario file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"scenario file not found: {p}")
    text = p.read_text(encoding="utf-8")
    try:
        if p.suffix == ".toml":
            data = tomllib.loads(text)
        elif p.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            raise ConfigError(f"unsupported scenario format {p.suffix!r}; use .toml or .yaml")
    except (tomllib.TOMLDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse {p.name}: {e}")
    scn = scenario_from_dict(data, base_dir=p.parent)
    logger.debug(f"loaded scenario {scn.name!r} from {p}")
    return scn
