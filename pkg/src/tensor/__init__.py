from src.tensor.graph import (
    Gradients,
    Graph,
    GraphError,
    NonFiniteError,
    Tensor,
    current_graph,
)
from src.tensor.optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "Gradients",
    "Graph",
    "GraphError",
    "NonFiniteError",
    "Tensor",
    "adam_step",
    "current_graph",
]
