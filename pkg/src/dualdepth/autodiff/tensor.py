"""Reverse-mode tape over 4-D numpy arrays.

Every value is a (batch, channel, height, width) array recorded on a Graph
in creation order, which is already a topological order because operations
can only consume tensors that exist.  backward() seeds a scalar loss with
gradient 1 and walks the tape once in reverse, accumulating gradients into
every tensor that requires them.  Nothing is mutated in place, so a graph
can be replayed for verification at any point.

Graphs are float32 by default; verification mode constructs
Graph(numpy.float64) and runs identical code at higher precision.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from dualdepth.errors import InputError

_ALLOWED = (np.dtype(np.float32), np.dtype(np.float64))


class Graph:
    """Recording tape; one logical execution context at a time."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        if self.dtype not in _ALLOWED:
            raise InputError("graph dtype must be float32 or float64")
        self._nodes: list[Tensor] = []

    def leaf(self, data, requires_grad: bool = False) -> "Tensor":
        """Enter an external array (parameter, input, constant) on the tape."""
        arr = np.array(data, dtype=self.dtype)
        if arr.ndim != 4:
            raise InputError(f"tensors are (n,c,h,w); got ndim {arr.ndim}")
        if min(arr.shape) < 1:
            raise InputError(f"all shape components must be >=1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("leaf values must be finite")
        return Tensor(arr, self, requires_grad=requires_grad, parents=(), backward_fn=None)

    def scalar(self, value: float, requires_grad: bool = False) -> "Tensor":
        return self.leaf(np.full((1, 1, 1, 1), value), requires_grad=requires_grad)

    def backward(self, loss: "Tensor") -> None:
        """Populate .grad for every requires-grad tensor reachable from loss."""
        if loss.graph is not self:
            raise InputError("loss belongs to a different graph")
        if loss.data.size != 1:
            raise InputError("backward requires a scalar (single-element) loss")
        for node in self._nodes:
            node.grad = None
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            if node.grad is not None and node._backward_fn is not None:
                node._backward_fn(node.grad)

    @property
    def num_nodes(self) -> int:
        return len(self._nodes)


class Tensor:
    """One tape entry: a value, its provenance, and its gradient slot."""

    __slots__ = ("data", "graph", "requires_grad", "grad", "_parents", "_backward_fn")

    def __init__(
        self,
        data: np.ndarray,
        graph: Graph,
        requires_grad: bool,
        parents: Sequence["Tensor"],
        backward_fn: Callable[[np.ndarray], None] | None,
    ):
        self.data = data
        self.graph = graph
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = tuple(parents)
        self._backward_fn = backward_fn
        graph._nodes.append(self)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise InputError(f"item() needs a single-element tensor, got {self.shape}")
        return float(self.data.reshape(()))

    def accumulate(self, g: np.ndarray) -> None:
        """Add an incoming gradient contribution (used by op backward rules)."""
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad = self.grad + g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def record(
    graph: Graph,
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward_fn: Callable[[np.ndarray], None],
) -> Tensor:
    """Create an op-output tensor; drops the backward rule when no parent needs it."""
    needs = any(p.requires_grad for p in parents)
    return Tensor(
        np.ascontiguousarray(data, dtype=graph.dtype),
        graph,
        requires_grad=needs,
        parents=parents if needs else (),
        backward_fn=backward_fn if needs else None,
    )


def same_graph(*tensors: Tensor) -> Graph:
    g = tensors[0].graph
    for t in tensors[1:]:
        if t.graph is not g:
            raise InputError("operands recorded on different graphs")
    return g
