"""
flexsim Policy Base

A PolicySpec is the immutable, reusable description of a scheduling policy;
`create()` builds the stateful Policy that lives inside one run's event loop.
"""

from abc import ABC
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Dict, Optional, Tuple, Type

from ..errors import ConfigError
from ..topology.graph import BipartiteGraph, ClusterPartition

if TYPE_CHECKING:
    from ..sim.engine import Simulation
    from ..sim.model import Job
    from .virtual_queue import VQParams


POLICY_KINDS = ("greedy", "modular", "virtual-queue", "expanded-modular")

_REGISTRY: Dict[str, Type["Policy"]] = {}


def register_policy(kind: str) -> Callable[[Type["Policy"]], Type["Policy"]]:
    def wrap(cls: Type["Policy"]) -> Type["Policy"]:
        _REGISTRY[kind] = cls
        cls.kind = kind
        return cls
    return wrap


@dataclass(frozen=True)
class PolicySpec:
    """
    Policy kind plus whatever precomputed structure it needs.

    `cluster_probs[s]` lists (queue cluster, probability) pairs for server
    cluster s. `augment` adds dummy arrival streams at rate 1 - rho' per queue.
    """
    kind: str
    partition: Optional[ClusterPartition] = None
    vq: Optional["VQParams"] = None
    cluster_probs: Optional[Tuple[Tuple[Tuple[int, float], ...], ...]] = None
    rho: Optional[float] = None
    augment: bool = False

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy {self.kind!r}; expected one of {POLICY_KINDS}", field="policy.kind")
        if self.augment and self.rho is None:
            raise ConfigError("augmented runs need rho", field="policy.augment")

    @property
    def slot_length(self) -> Optional[float]:
        return self.vq.slot_length if self.vq is not None else None

    def create(self, graph: BipartiteGraph) -> "Policy":
        try:
            cls = _REGISTRY[self.kind]
        except KeyError:
            raise ConfigError(f"policy {self.kind!r} is not registered", field="policy.kind")
        return cls(self, graph)


class Policy(ABC):
    """
    Scheduling decisions for one run.

    The engine calls the hooks below; a hook acts through the engine
    (start_service, start_dummy, schedule). A server left untouched after
    on_completion stays Idle.
    """

    kind: str = ""
    # only policies that hand out dummy jobs receive the augmented dummy streams
    uses_dummies: bool = False

    def __init__(self, spec: PolicySpec, graph: BipartiteGraph):
        self.spec = spec
        self.graph = graph

    def attach(self, sim: "Simulation") -> None:
        """Validate against the graph and schedule initial timers."""

    def on_arrival(self, sim: "Simulation", job: "Job") -> None:
        raise NotImplementedError

    def on_completion(self, sim: "Simulation", server: int, job: "Job") -> None:
        raise NotImplementedError

    def on_timer(self, sim: "Simulation", key: str, payload: Any) -> None:
        pass

    def on_horizon(self, sim: "Simulation") -> None:
        """Arrivals have stopped."""

    def backlog(self) -> int:
        """Jobs held by the policy outside the engine's queues."""
        return 0

    def diagnostics(self, sim: "Simulation") -> Dict[str, Any]:
        return {}

    def batch_log(self) -> list:
        return []

    @property
    def work_conserving(self) -> bool:
        return False
