"""Balanced graph partitioning with a differentiable normalized-cut objective."""

from .graph import Graph, GraphError, generate_erdos_renyi, generate_scale_free

__version__ = "0.1.0"

__all__ = ["Graph", "GraphError", "generate_erdos_renyi", "generate_scale_free", "__version__"]
