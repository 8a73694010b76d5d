"""Reverse-mode autodiff over numpy arrays.

A Tensor wraps a contiguous float buffer (float32 for training, float64 for
gradient checking) plus an optional gradient buffer. Operations record their
parents and a backward closure; `Tensor.backward()` replays the recorded
graph in exact reverse topological order, accumulating gradients across
fan-out. There is no implicit broadcasting anywhere except bias-add, which
op implementations opt into explicitly.
"""

import contextlib

import numpy as np

from ..errors import ContractError, ShapeError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (inference / plain numeric code)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        # ascontiguousarray alone would promote rank-0 to rank-1
        self.data = np.ascontiguousarray(arr).reshape(arr.shape)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def zeros(shape, dtype=np.float32, requires_grad=False):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad)

    @staticmethod
    def param(data):
        """Wrap an array as a trainable parameter."""
        return Tensor(np.asarray(data), requires_grad=True)

    # -- basic introspection ---------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, grad={self.requires_grad})"

    # -- graph machinery -------------------------------------------------------

    def accumulate_grad(self, g: np.ndarray, own: bool = False) -> None:
        """Add a gradient contribution.

        own=True transfers the buffer without copying; callers may only set
        it for arrays they freshly allocated and hand to exactly one tensor.
        """
        if g.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match tensor shape {self.data.shape}"
            )
        if self.grad is None:
            if own and g.dtype == self.data.dtype:
                self.grad = g
            else:
                self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed=None) -> None:
        """Backpropagate from this tensor.

        Without an explicit seed the tensor must be scalar (a loss).
        """
        if seed is None:
            if self.data.size != 1:
                raise ContractError(
                    f"backward() without seed requires a scalar, got shape {self.data.shape}"
                )
            seed = np.ones_like(self.data)
        self.accumulate_grad(np.asarray(seed, dtype=self.data.dtype))
        for node in reversed(graph_nodes(self)):
            if node._backward_fn is not None:
                node._backward_fn(node.grad)


def graph_nodes(root: Tensor):
    """Topologically ordered record of the graph below `root` (iterative DFS)."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def make_node(data, parents, backward_fn) -> Tensor:
    """Wire up an op result; drops the graph when grads are off or unneeded."""
    requires = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data)
    if requires:
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def check_same_dtype(*tensors):
    dtypes = {t.data.dtype for t in tensors}
    if len(dtypes) > 1:
        raise ShapeError(f"mixed dtypes in one op: {sorted(d.name for d in dtypes)}")
