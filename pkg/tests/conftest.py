"""Shared fixtures for the flexsim tests"""
import logging

import pytest

from flexsim import logging_setup
from flexsim.config import get_settings
from flexsim.topology.builders import build_complete, build_inflexible, build_modular
from flexsim.topology.graph import BipartiteGraph


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Each test sees default settings with a single worker."""
    for name in ("FLEXSIM_LOG_LEVEL", "FLEXSIM_LOG_FORMAT", "FLEXSIM_MAX_QUEUE", "FLEXSIM_TRACE_DIR"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("FLEXSIM_THREADS", "1")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def reset_logging():
    """Undo setup_logging so each test binds a fresh handler."""
    logger = logging.getLogger("flexsim")
    yield logger
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
    logging_setup._configured = False


@pytest.fixture
def k22() -> BipartiteGraph:
    return build_complete(2)


@pytest.fixture
def modular_4_2() -> BipartiteGraph:
    return build_modular(4, 2)


@pytest.fixture
def inflexible_4() -> BipartiteGraph:
    return build_inflexible(4)


@pytest.fixture
def path_graph() -> BipartiteGraph:
    """Queues {1,2,3}, servers {1,2}, edges (1,1) (2,1) (2,2) (3,2)."""
    return BipartiteGraph.from_edges(3, 2, [(0, 0), (1, 0), (1, 1), (2, 1)])
