"""Dense tensor with an optional gradient buffer and a hand-written backward pass."""

from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

DEFAULT_DTYPE = np.float32


class Tensor:
    """
    Row-major real array plus the op node that produced it.

    Leaf tensors created with ``requires_grad=True`` are parameters; tensors
    produced by ops keep references to their parents and a backward function
    mapping the output gradient to one gradient per parent.
    """

    __slots__ = ("values", "grad", "requires_grad", "parents", "backward_fn", "name")

    def __init__(
        self,
        values,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        name: Optional[str] = None,
        dtype=None,
    ):
        array = np.asarray(values)
        if dtype is not None:
            array = array.astype(dtype, copy=False)
        elif array.dtype not in (np.float32, np.float64):
            array = array.astype(DEFAULT_DTYPE)
        if array.ndim > 0 and 0 in array.shape:
            raise ValueError(f"Tensor extents must be positive, got shape {array.shape}")
        self.values = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def numpy(self) -> np.ndarray:
        """Return the underlying array (not a copy)."""
        return self.values

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Same values, cut from the graph."""
        return Tensor(self.values, dtype=self.values.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        Accumulate gradients of this tensor into every tensor it depends on.

        Without an explicit ``grad`` the tensor must hold a single value.
        """
        if not self.requires_grad:
            return
        if grad is None:
            if self.values.size != 1:
                raise ValueError("backward() without a gradient needs a single-value tensor")
            grad = np.ones(self.shape, dtype=np.float64)
        grads = {id(self): np.asarray(grad, dtype=np.float64).reshape(self.shape)}

        for node in reversed(self._topological_order()):
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue
            if node.backward_fn is None:
                node.grad = node_grad if node.grad is None else node.grad + node_grad
                continue
            for parent, parent_grad in zip(node.parents, node.backward_fn(node_grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"


def parameter(values, name: Optional[str] = None, dtype=DEFAULT_DTYPE) -> Tensor:
    """Create a trainable leaf tensor."""
    return Tensor(values, requires_grad=True, name=name, dtype=dtype)


def constant(values, dtype=None) -> Tensor:
    """Create a leaf tensor that never receives gradients."""
    return Tensor(values, dtype=dtype)


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for tensor in tensors:
        tensor.zero_grad()
