"""
Dense tensors with reverse-mode automatic differentiation.

Operations are recorded on the active Tape (see ``Tape.__enter__``); outside
a tape forward passes run without recording. Storage is float32 unless a
``precision(np.float64)`` block is active, which gradient checks use.
"""
import contextlib
import logging
import threading
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from deepradar.errors import NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

_state = threading.local()

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.dtype(np.float32))


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """Create tensors with ``dtype`` inside the block (float64 for gradient checks)."""
    previous = default_dtype()
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = previous


def _active_tape() -> Optional["Tape"]:
    stack = getattr(_state, "tapes", None)
    return stack[-1] if stack else None


class Tensor:
    """
    N-dimensional array on the gradient tape.

    Leaves created with ``requires_grad=True`` own a zero-initialized grad
    buffer of the same shape; recorded results get theirs during backward.
    """

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=default_dtype())
        if self.data.ndim and 0 in self.data.shape:
            raise ShapeError(f"tensor '{name}' has an empty extent: {self.data.shape}")
        self.requires_grad = requires_grad
        self.name = name
        self.grad: Optional[np.ndarray] = np.zeros_like(self.data) if requires_grad else None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dims(self) -> List[int]:
        return list(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single element, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # Operator sugar over deepradar.autodiff.ops
    def __add__(self, other):
        from deepradar.autodiff import ops
        return ops.add(self, other) if isinstance(other, Tensor) else ops.shift(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        from deepradar.autodiff import ops
        return ops.sub(self, other) if isinstance(other, Tensor) else ops.shift(self, -float(other))

    def __rsub__(self, other):
        from deepradar.autodiff import ops
        return ops.shift(ops.scale(self, -1.0), float(other))

    def __mul__(self, other):
        from deepradar.autodiff import ops
        return ops.mul(self, other) if isinstance(other, Tensor) else ops.scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        from deepradar.autodiff import ops
        if isinstance(other, Tensor):
            raise TypeError("tensor division is not supported; scale by a constant instead")
        return ops.scale(self, 1.0 / float(other))

    def __neg__(self):
        from deepradar.autodiff import ops
        return ops.scale(self, -1.0)


class _Node:
    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, backward: BackwardFn):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Tape:
    """
    Ordered record of operations. Nodes are appended as ops execute, so
    every node's inputs precede it.

    Usage::

        with Tape() as tape:
            loss = model_loss(...)
        backward(loss, tape)
    """

    def __init__(self):
        self.nodes: List[_Node] = []
        self._produced: Dict[int, _Node] = {}

    def __enter__(self) -> "Tape":
        stack = getattr(_state, "tapes", None)
        if stack is None:
            stack = _state.tapes = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _state.tapes.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, backward: BackwardFn) -> None:
        node = _Node(op, inputs, output, backward)
        self.nodes.append(node)
        self._produced[id(output)] = node

    def produced(self, tensor: Tensor) -> bool:
        return id(tensor) in self._produced

    def leaves(self) -> List[Tensor]:
        """requires_grad inputs not produced by any recorded op, in first-use order."""
        seen = set()
        leaves = []
        for node in self.nodes:
            for tensor in node.inputs:
                if tensor.requires_grad and id(tensor) not in self._produced and id(tensor) not in seen:
                    seen.add(id(tensor))
                    leaves.append(tensor)
        return leaves


def record(op: str, inputs: Sequence[Tensor], data: np.ndarray, backward: BackwardFn) -> Tensor:
    """
    Wrap an op result and record it on the active tape when any input
    requires grad. Non-finite results are an error state.
    """
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(op, f"op '{op}' produced non-finite values (shape {data.shape})")
    tape = _active_tape()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = data.astype(default_dtype(), copy=False)
    out.requires_grad = needs_grad
    out.grad = None
    out.name = op
    if needs_grad:
        tape.record(op, tuple(inputs), out, backward)
    return out


def backward(loss: Tensor, tape: Tape, accumulate: bool = False) -> None:
    """
    Populate ``grad`` of every requires_grad leaf with d(loss)/d(leaf).

    By default leaf grads are reset before accumulating; pass
    ``accumulate=True`` to add onto the grads of a previous call.

    Args:
        loss: Scalar tensor produced on ``tape``
        tape: Tape that recorded the graph
        accumulate: Keep existing leaf grads instead of resetting them
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not tape.produced(loss):
        raise ValueError("loss is not reachable from the tape")

    leaves = tape.leaves()
    if not accumulate:
        for leaf in leaves:
            leaf.grad = np.zeros_like(leaf.data)

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        upstream = grads.pop(id(node.output), None)
        if upstream is None:
            continue
        node.output.grad = upstream
        input_grads = node.backward(upstream)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if grad.shape != tensor.shape:
                grad = grad.reshape(tensor.shape)
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad

    for leaf in leaves:
        grad = grads.get(id(leaf))
        if grad is None:
            continue
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.data)
        leaf.grad += grad.astype(leaf.data.dtype, copy=False)
