"""
flexsim Errors

One hierarchy for every failure the toolkit reports.
"""

from typing import Any, Dict, Optional


class FlexSimError(Exception):
    """Base class for all flexsim failures."""

    exit_code: int = 3


class ConfigError(FlexSimError, ValueError):
    """Invalid scenario, settings or command-line arguments."""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class GraphError(FlexSimError, ValueError):
    """Invalid graph construction request or generator exhaustion."""


class VerificationTooLargeError(FlexSimError):
    """Exact subset enumeration refused because the graph is too large."""

    def __init__(self, n: int, limit: int):
        self.n = n
        self.limit = limit
        super().__init__(
            f"graph with {n} left nodes is too large for exact verification "
            f"(limit {limit}); pass a subset-size cap"
        )


class DomainError(FlexSimError, ValueError):
    """A formula was evaluated outside its domain."""


class InfeasibleFlowError(FlexSimError):
    """No flow satisfies the requested demand; carries the violating cut."""

    def __init__(self, message: str, cut: Optional[Dict[str, Any]] = None):
        self.cut = cut or {}
        super().__init__(message)


class SimulationError(FlexSimError):
    """Invalid simulation configuration or inconsistent engine state."""


class AuditError(SimulationError):
    """An engine audit hook found a violated invariant."""
