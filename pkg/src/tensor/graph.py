"""Define-by-run reverse-mode differentiation.

A ``Graph`` is an op tape: while it is active (``with Graph() as graph:``)
every differentiable op that touches a tracked tensor appends one record.
``graph.backward(loss)`` then replays the tape in exact reverse creation
order. Tensors created outside any graph carry no ``node_id`` and are plain
values.

Graphs nest. Code that needs an inner derivative (the critic's input
gradient for the gradient penalty) opens a second graph; tensors from the
outer graph are leaves there.
"""

from __future__ import annotations

import contextvars
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float32

VJP = Callable[[np.ndarray, tuple[bool, ...]], Sequence[np.ndarray | None]]

_ACTIVE: contextvars.ContextVar[Graph | None] = contextvars.ContextVar(
    "active_graph", default=None
)


class GraphError(ValueError):
    """Misuse of the differentiation graph (foreign loss, non-scalar loss...)."""


class NonFiniteError(GraphError):
    """An op produced NaN or infinite values."""


class Tensor:
    """N-dimensional real array, optionally a node of the active graph."""

    __slots__ = ("data", "requires_grad", "node_id", "_graph")

    def __init__(self, data: Any, requires_grad: bool = False) -> None:
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.node_id: int | None = None
        self._graph: Graph | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self) -> str:
        tracked = f", node={self.node_id}" if self.node_id is not None else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tracked})"

    # Arithmetic dispatches to the op library.
    def __add__(self, other: Any) -> Tensor:
        from src.tensor import ops

        return ops.add(self, other)

    def __radd__(self, other: Any) -> Tensor:
        from src.tensor import ops

        return ops.add(other, self)

    def __sub__(self, other: Any) -> Tensor:
        from src.tensor import ops

        return ops.subtract(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        from src.tensor import ops

        return ops.subtract(other, self)

    def __mul__(self, other: Any) -> Tensor:
        from src.tensor import ops

        return ops.multiply(self, other)

    def __rmul__(self, other: Any) -> Tensor:
        from src.tensor import ops

        return ops.multiply(other, self)

    def __truediv__(self, other: Any) -> Tensor:
        from src.tensor import ops

        return ops.divide(self, other)

    def __neg__(self) -> Tensor:
        from src.tensor import ops

        return ops.negative(self)


@dataclass
class OpRecord:
    kind: str
    inputs: tuple[int | None, ...]
    output: int
    vjp: VJP

    @property
    def needs(self) -> tuple[bool, ...]:
        return tuple(node is not None for node in self.inputs)


class Gradients:
    """Backward result: gradient arrays keyed by the tensors they belong to.

    Tensors the loss does not depend on (or that were never tracked) get a
    zero gradient of their own shape.
    """

    def __init__(self, by_id: dict[int, tuple[Tensor, np.ndarray | None]]) -> None:
        self._by_id = by_id

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        entry = self._by_id.get(id(tensor))
        if entry is None or entry[1] is None:
            return np.zeros_like(tensor.data)
        return entry[1]

    def __contains__(self, tensor: object) -> bool:
        return id(tensor) in self._by_id

    def reached(self, tensor: Tensor) -> bool:
        entry = self._by_id.get(id(tensor))
        return entry is not None and entry[1] is not None

    def select(self, named: Iterable[tuple[str, Tensor]]) -> dict[str, np.ndarray]:
        return {name: self[tensor] for name, tensor in named}


class Graph:
    """Ordered op tape plus leaf registry for one forward pass."""

    def __init__(self) -> None:
        self.records: list[OpRecord] = []
        self._leaves: dict[int, tuple[int, Tensor]] = {}  # id(tensor) -> (node, tensor)
        self._next_node = 0
        self._token: contextvars.Token[Graph | None] | None = None

    def __enter__(self) -> Graph:
        self._token = _ACTIVE.set(self)
        return self

    def __exit__(self, *args: object) -> None:
        if self._token is not None:
            _ACTIVE.reset(self._token)
            self._token = None

    def _new_node(self) -> int:
        node = self._next_node
        self._next_node += 1
        return node

    def track(self, tensor: Tensor) -> int | None:
        """Node id of ``tensor`` in this graph, registering it as a leaf if needed."""
        if tensor._graph is self:
            return tensor.node_id
        if not tensor.requires_grad:
            return None
        entry = self._leaves.get(id(tensor))
        if entry is not None:
            return entry[0]
        node = self._new_node()
        self._leaves[id(tensor)] = (node, tensor)
        return node

    def append(
        self, kind: str, inputs: tuple[int | None, ...], out: np.ndarray, vjp: VJP
    ) -> Tensor:
        result = Tensor(out, requires_grad=True)
        node = self._new_node()
        result.node_id = node
        result._graph = self
        self.records.append(OpRecord(kind, inputs, node, vjp))
        return result

    def backward(self, loss: Tensor) -> Gradients:
        """Accumulate d(loss)/d(leaf) for every leaf of this graph."""
        if loss._graph is not self or loss.node_id is None:
            raise GraphError("loss is not a node of this graph")
        if loss.size != 1:
            raise GraphError(f"loss must be a scalar, got shape {loss.shape}")

        pending: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
        for op in reversed(self.records):
            upstream = pending.pop(op.output, None)
            if upstream is None:
                continue
            needs = op.needs
            for node, grad in zip(op.inputs, op.vjp(upstream, needs), strict=True):
                if node is None or grad is None:
                    continue
                if node in pending:
                    pending[node] = pending[node] + grad
                else:
                    pending[node] = grad

        by_id: dict[int, tuple[Tensor, np.ndarray | None]] = {}
        for key, (node, tensor) in self._leaves.items():
            grad = pending.get(node)
            if grad is not None and grad.shape != tensor.shape:
                grad = grad.reshape(tensor.shape)
            by_id[key] = (tensor, grad)
        logger.debug("backward over %d records, %d leaves", len(self.records), len(by_id))
        return Gradients(by_id)


def current_graph() -> Graph | None:
    return _ACTIVE.get()


def record(kind: str, inputs: Sequence[Tensor], out: np.ndarray, vjp: VJP) -> Tensor:
    """Wrap an op result, appending it to the active graph when any input is tracked.

    Raises NonFiniteError if ``out`` holds NaN or inf.
    """
    if not np.isfinite(out).all():
        raise NonFiniteError(f"{kind} produced non-finite values")
    graph = _ACTIVE.get()
    if graph is None:
        return Tensor(out)
    nodes = tuple(graph.track(t) for t in inputs)
    if all(node is None for node in nodes):
        return Tensor(out)
    return graph.append(kind, nodes, out, vjp)
