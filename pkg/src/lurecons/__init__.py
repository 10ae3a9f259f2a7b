"""Robust consensus of linear multi-agent systems over sector-bounded relative-state channels."""

from .edge import AgentDynamics, EdgeSystem, consensus_input, edge_state, equivalence_check
from .graph import build_graph, complete_graph, graph_matrices, spectral_data
from .kernels import BACKEND as KERNEL_BACKEND
from .sector import ChannelBank, SectorBounds, SectorChannel

__version__ = "0.1.0"

__all__ = [
    "AgentDynamics", "EdgeSystem", "consensus_input", "edge_state", "equivalence_check",
    "build_graph", "complete_graph", "graph_matrices", "spectral_data", "KERNEL_BACKEND",
    "ChannelBank", "SectorBounds", "SectorChannel",
]
