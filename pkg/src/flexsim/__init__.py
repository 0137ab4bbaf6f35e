"""
flexsim - Flexible Queueing Architectures

Simulation and analysis of bipartite queue-server flexibility graphs:
topologies, capacity regions, scheduling policies and delay bounds.
"""

__version__ = "0.1.0"
