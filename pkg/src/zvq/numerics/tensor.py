"""Float32 tensors and the reverse-mode tape they are differentiated on."""

import numpy as np

from ..errors import ShapeError, TapeError


class Tensor:
    """Dense N-dimensional float32 array with an optional gradient buffer.

    Data is kept C-contiguous so the flat buffer is the row-major layout of
    ``shape``. ``grad``, once populated by ``backward``, always has the same
    shape and dtype as ``data``.

    Scalar reductions additionally stash their float64 accumulation in
    ``scalar_f64`` before rounding to float32. Verification harnesses read it
    to keep finite-difference measurement noise below tolerance; nothing in
    the forward or backward path depends on it.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "scalar_f64")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.ascontiguousarray(np.asarray(data, dtype=np.float32))
        if arr.size == 0:
            raise ShapeError(f"tensor dimensions must all be >= 1, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self.scalar_f64: float | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        # += keeps the doubling semantics of repeated backward passes exact.
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"


class TapeNode:
    """One executed operation: its output, inputs, and vector-Jacobian product."""

    __slots__ = ("out", "inputs", "vjp", "op_name")

    def __init__(self, out, inputs, vjp, op_name):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp
        self.op_name = op_name


class Tape:
    """Ordered record of executed operations.

    Nodes are appended in execution order, so every node's inputs were
    produced (or existed as leaves) before it: reverse iteration visits each
    node exactly once with its output gradient fully accumulated.
    """

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self._out_ids: set[int] = set()

    def record(self, out: Tensor, inputs: tuple, vjp, op_name: str = "") -> Tensor:
        """Attach a node computing ``out`` from ``inputs`` with backward ``vjp``.

        ``vjp`` receives the gradient w.r.t. ``out`` and returns one gradient
        array (or None) per input, in order.
        """
        out.requires_grad = any(t.requires_grad for t in inputs)
        self.nodes.append(TapeNode(out, inputs, vjp, op_name))
        self._out_ids.add(id(out))
        return out

    def produced(self, t: Tensor) -> bool:
        return id(t) in self._out_ids

    def __len__(self) -> int:
        return len(self.nodes)


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``grad`` of every leaf reachable from ``loss``.

    Leaves are tensors with ``requires_grad`` that were not produced by an op
    on this tape (parameters and explicitly-tracked inputs). Gradients are
    added, never overwritten: calling backward twice without zeroing grads
    doubles every gradient.
    """
    if loss.size != 1:
        raise TapeError(f"loss must be a scalar tensor, got shape {loss.shape}")
    if not tape.produced(loss):
        raise TapeError("loss was not produced by an operation on this tape")

    # Gradient of each tensor along the walk, keyed by object identity.
    flowing: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes):
        g = flowing.pop(id(node.out), None)
        if g is None:
            continue
        if not node.out.requires_grad:
            continue
        contribs = node.vjp(g)
        for t, c in zip(node.inputs, contribs):
            if c is None or not t.requires_grad:
                continue
            key = id(t)
            if key in flowing:
                flowing[key] = flowing[key] + c
            else:
                flowing[key] = c
                if not tape.produced(t):
                    leaves[key] = t
    for key, t in leaves.items():
        t.accumulate_grad(flowing[key].reshape(t.shape))
