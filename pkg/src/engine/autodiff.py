"""
Reverse-mode automatic differentiation
A small tape-based engine over dense float64 numpy arrays. A ComputationGraph
records every operation in construction order; backward() walks the tape in
reverse and populates .grad on the leaf tensors that require it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError, NumericalError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_LEAKY_SLOPE = 0.2
LOG_CLAMP = 1e-7


class Tensor:
    """
    n-dimensional float64 value array with an attached gradient slot.

    Args:
        values: Anything numpy can turn into a float array
        requires_grad (bool): Whether backward() should populate .grad
        name (str): Optional label used in error messages
    """

    __slots__ = ("values", "grad", "requires_grad", "name")

    def __init__(self, values: Any, requires_grad: bool = False, name: str = ""):
        array = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(array)):
            raise NumericalError(f"Non-finite value in tensor {name or '<unnamed>'}")
        self.values = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def size(self) -> int:
        return int(self.values.size)

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() on a tensor of shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def clone(self) -> "Tensor":
        copy = Tensor(self.values.copy(), requires_grad=self.requires_grad, name=self.name)
        if self.grad is not None:
            copy.grad = self.grad.copy()
        return copy

    def __repr__(self):
        return f"Tensor(shape={self.shape}, name={self.name!r}, requires_grad={self.requires_grad})"


@dataclass
class Op:
    """Forward function, vector-Jacobian product and shape check for one op kind"""

    kind: str
    arity: Optional[int]
    forward: Callable[..., np.ndarray]
    vjp: Callable[..., List[Optional[np.ndarray]]]
    check: Optional[Callable[..., None]] = None


OPS: Dict[str, Op] = {}


def _register(kind: str, arity: Optional[int], check: Optional[Callable] = None):
    """Decorator pairing a forward function with its vjp"""

    def wrap(vjp):
        def decorator(forward):
            OPS[kind] = Op(kind=kind, arity=arity, forward=forward, vjp=vjp, check=check)
            return forward
        return decorator

    return wrap


def _same_shape(kind, arrays, attrs):
    if arrays[0].shape != arrays[1].shape:
        raise ShapeError(f"{kind}: shapes {arrays[0].shape} and {arrays[1].shape} differ")


def _matmul_check(kind, arrays, attrs):
    a, b = arrays
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")


def _bias_check(kind, arrays, attrs):
    x, b = arrays
    if x.ndim != 2 or b.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"add_bias: cannot add bias {b.shape} to {x.shape}")


def _matrix_check(kind, arrays, attrs):
    if arrays[0].ndim != 2:
        raise ShapeError(f"{kind}: expected a 2-D input, got {arrays[0].shape}")


def _scalars_check(kind, arrays, attrs):
    if not arrays:
        raise ShapeError(f"{kind}: needs at least one input")
    for array in arrays:
        if array.size != 1:
            raise ShapeError(f"{kind}: every input must be a scalar, got {array.shape}")


def _positive_check(kind, arrays, attrs):
    if np.any(arrays[0] <= 0.0):
        raise DomainError(f"{kind}: input must be strictly positive")


def _non_negative_check(kind, arrays, attrs):
    if np.any(arrays[0] < 0.0):
        raise DomainError(f"{kind}: input must be non-negative")


# Binary ops

@_register("matmul", 2, _matmul_check)(lambda g, ins, out, attrs: [g @ ins[1].T, ins[0].T @ g])
def _matmul(a, b):
    return a @ b


@_register("add_bias", 2, _bias_check)(lambda g, ins, out, attrs: [g, g.sum(axis=0)])
def _add_bias(x, b):
    return x + b


@_register("add", 2, _same_shape)(lambda g, ins, out, attrs: [g, g])
def _add(a, b):
    return a + b


@_register("sub", 2, _same_shape)(lambda g, ins, out, attrs: [g, -g])
def _sub(a, b):
    return a - b


@_register("mul", 2, _same_shape)(lambda g, ins, out, attrs: [g * ins[1], g * ins[0]])
def _mul(a, b):
    return a * b


# Unary ops

@_register("neg", 1)(lambda g, ins, out, attrs: [-g])
def _neg(a):
    return -a


@_register("scalar_mul", 1)(lambda g, ins, out, attrs: [attrs["c"] * g])
def _scalar_mul(a, c):
    return c * a


@_register("add_scalar", 1)(lambda g, ins, out, attrs: [g])
def _add_scalar(a, c):
    return a + c


@_register("relu", 1)(lambda g, ins, out, attrs: [g * (ins[0] > 0.0)])
def _relu(a):
    return np.maximum(a, 0.0)


@_register("leaky_relu", 1)(
    lambda g, ins, out, attrs: [g * np.where(ins[0] > 0.0, 1.0, attrs["slope"])]
)
def _leaky_relu(a, slope=DEFAULT_LEAKY_SLOPE):
    return np.where(a > 0.0, a, slope * a)


@_register("tanh", 1)(lambda g, ins, out, attrs: [g * (1.0 - out * out)])
def _tanh(a):
    return np.tanh(a)


@_register("sigmoid", 1)(lambda g, ins, out, attrs: [g * out * (1.0 - out)])
def _sigmoid(a):
    # tanh form stays finite for large |a|
    return 0.5 * (1.0 + np.tanh(0.5 * a))


@_register("clamp", 1)(
    lambda g, ins, out, attrs: [g * ((ins[0] >= attrs["lo"]) & (ins[0] <= attrs["hi"]))]
)
def _clamp(a, lo, hi):
    return np.clip(a, lo, hi)


@_register("log", 1, _positive_check)(lambda g, ins, out, attrs: [g / ins[0]])
def _log(a):
    return np.log(a)


@_register("exp", 1)(lambda g, ins, out, attrs: [g * out])
def _exp(a):
    return np.exp(a)


@_register("square", 1)(lambda g, ins, out, attrs: [2.0 * ins[0] * g])
def _square(a):
    return a * a


@_register("sqrt", 1, _non_negative_check)(lambda g, ins, out, attrs: [0.5 * g / out])
def _sqrt(a):
    return np.sqrt(a)


@_register("mean", 1)(lambda g, ins, out, attrs: [np.full_like(ins[0], g / ins[0].size)])
def _mean(a):
    return np.asarray(a.mean())


@_register("sum_rows", 1, _matrix_check)(
    lambda g, ins, out, attrs: [np.broadcast_to(g, ins[0].shape).copy()]
)
def _sum_rows(a):
    return a.sum(axis=1, keepdims=True)


@_register("transpose", 1, _matrix_check)(lambda g, ins, out, attrs: [g.T])
def _transpose(a):
    return a.T.copy()


# Variadic ops

def _soft_combine_vjp(g, ins, out, attrs):
    losses = np.array([float(v.reshape(-1)[0]) for v in ins])
    weights = softmax(attrs["delta"] * losses)
    total = float(out)
    local = weights * (1.0 + attrs["delta"] * (losses - total))
    return [np.full_like(v, g * d) for v, d in zip(ins, local)]


@_register("soft_combine", None, _scalars_check)(_soft_combine_vjp)
def _soft_combine(*losses, delta):
    values = np.array([float(v.reshape(-1)[0]) for v in losses])
    return np.asarray(np.dot(softmax(delta * values), values))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax over a 1-D array"""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = np.exp(logits - logits.max())
    return shifted / shifted.sum()


@dataclass
class Node:
    kind: str
    inputs: tuple
    output: Tensor
    attrs: Dict[str, Any] = field(default_factory=dict)


class ComputationGraph:
    """
    Tape of operations in construction order.

    Leaves are registered on first use, so parameter tensors can be passed
    straight into ops. A graph is meant to live for exactly one loss
    evaluation and must stay on one thread.
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self._index: Dict[int, int] = {}

    def __len__(self):
        return len(self.nodes)

    def leaf(self, tensor: Tensor) -> Tensor:
        """Register a tensor as a leaf (no-op if already on the tape)"""
        if id(tensor) not in self._index:
            self._index[id(tensor)] = len(self.nodes)
            self.nodes.append(Node(kind="leaf", inputs=(), output=tensor))
        return tensor

    def constant(self, values: Any, name: str = "") -> Tensor:
        """A leaf that never receives a gradient (detached input)"""
        return self.leaf(Tensor(values, requires_grad=False, name=name))

    def node_id(self, tensor: Tensor) -> int:
        try:
            return self._index[id(tensor)]
        except KeyError:
            raise ContractError(f"{tensor!r} is not recorded in this graph") from None

    def forward_op(self, kind: str, inputs: Sequence[Tensor], **attrs) -> Tensor:
        """
        Apply one op and record it on the tape.

        Args:
            kind (str): Registered op kind
            inputs (list): Input tensors, registered as leaves if unseen
            **attrs: Op attributes (slope, c, lo/hi, delta)

        Returns:
            Tensor: The recorded output
        """
        op = OPS.get(kind)
        if op is None:
            raise ContractError(f"Unknown op kind: {kind}")
        if op.arity is not None and len(inputs) != op.arity:
            raise ShapeError(f"{kind} takes {op.arity} inputs, got {len(inputs)}")

        ids = tuple(self._index[id(self.leaf(t))] for t in inputs)
        arrays = [t.values for t in inputs]
        if op.check is not None:
            op.check(kind, arrays, attrs)

        with np.errstate(all="ignore"):
            result = op.forward(*arrays, **attrs)
        if not np.all(np.isfinite(result)):
            raise NumericalError(f"{kind} produced a non-finite value")

        output = Tensor.__new__(Tensor)
        output.values = np.asarray(result, dtype=np.float64)
        output.grad = None
        output.requires_grad = False
        output.name = kind
        self._index[id(output)] = len(self.nodes)
        self.nodes.append(Node(kind=kind, inputs=ids, output=output, attrs=attrs))
        return output

    # Thin wrappers, one per op kind

    def matmul(self, a, b):
        return self.forward_op("matmul", [a, b])

    def add_bias(self, x, b):
        return self.forward_op("add_bias", [x, b])

    def add(self, a, b):
        return self.forward_op("add", [a, b])

    def sub(self, a, b):
        return self.forward_op("sub", [a, b])

    def mul(self, a, b):
        return self.forward_op("mul", [a, b])

    def neg(self, a):
        return self.forward_op("neg", [a])

    def scalar_mul(self, a, c: float):
        return self.forward_op("scalar_mul", [a], c=float(c))

    def add_scalar(self, a, c: float):
        return self.forward_op("add_scalar", [a], c=float(c))

    def relu(self, a):
        return self.forward_op("relu", [a])

    def leaky_relu(self, a, slope: float = DEFAULT_LEAKY_SLOPE):
        return self.forward_op("leaky_relu", [a], slope=float(slope))

    def tanh(self, a):
        return self.forward_op("tanh", [a])

    def sigmoid(self, a):
        return self.forward_op("sigmoid", [a])

    def clamp(self, a, lo: float, hi: float):
        return self.forward_op("clamp", [a], lo=float(lo), hi=float(hi))

    def log(self, a):
        return self.forward_op("log", [a])

    def exp(self, a):
        return self.forward_op("exp", [a])

    def square(self, a):
        return self.forward_op("square", [a])

    def sqrt(self, a):
        return self.forward_op("sqrt", [a])

    def mean(self, a):
        return self.forward_op("mean", [a])

    def sum_rows(self, a):
        return self.forward_op("sum_rows", [a])

    def transpose(self, a):
        return self.forward_op("transpose", [a])

    def soft_combine(self, losses: Sequence[Tensor], delta: float):
        return self.forward_op("soft_combine", list(losses), delta=float(delta))


def forward_op(graph: ComputationGraph, kind: str, inputs: Sequence[Tensor], **attrs) -> Tensor:
    """Module-level alias of ComputationGraph.forward_op"""
    return graph.forward_op(kind, inputs, **attrs)


def backward(graph: ComputationGraph, root: Tensor) -> None:
    """
    Populate .grad on every leaf that requires it with d(root)/d(leaf).

    Leaves that the root does not depend on get a zero gradient.
    Intermediate gradients are discarded as soon as they are consumed.
    """
    if root.size != 1:
        raise ContractError(f"backward() needs a scalar root, got shape {root.shape}")
    root_id = graph.node_id(root)

    for node in graph.nodes:
        if node.kind == "leaf" and node.output.requires_grad:
            node.output.grad = np.zeros_like(node.output.values)

    pending: Dict[int, np.ndarray] = {root_id: np.ones_like(root.values)}
    for node_id in range(root_id, -1, -1):
        grad = pending.pop(node_id, None)
        if grad is None:
            continue
        node = graph.nodes[node_id]
        if node.kind == "leaf":
            if node.output.requires_grad:
                node.output.grad = np.array(grad, dtype=np.float64).reshape(node.output.shape)
            continue

        inputs = [graph.nodes[i].output.values for i in node.inputs]
        input_grads = OPS[node.kind].vjp(grad, inputs, node.output.values, node.attrs)
        for input_id, input_grad in zip(node.inputs, input_grads):
            if input_id in pending:
                pending[input_id] = pending[input_id] + input_grad
            else:
                pending[input_id] = input_grad


def grad_l2_norm(tensors: Iterable[Tensor]) -> float:
    """
    L2 norm of all gradients, flattened into one vector.

    Raises:
        ContractError: If any tensor has no gradient yet
    """
    total = 0.0
    for tensor in tensors:
        if tensor.grad is None:
            raise ContractError(f"Missing gradient on {tensor!r}")
        total += float(np.sum(tensor.grad * tensor.grad))
    return math.sqrt(total)


def finite_difference_grad(
    loss_fn: Callable[[], float],
    tensor: Tensor,
    eps: float = 1e-5,
) -> np.ndarray:
    """
    Central finite-difference gradient of loss_fn with respect to tensor.

    loss_fn must rebuild its graph from the current tensor values on every call.
    """
    grad = np.zeros_like(tensor.values)
    for index in np.ndindex(*tensor.shape):
        original = tensor.values[index]
        tensor.values[index] = original + eps
        upper = loss_fn()
        tensor.values[index] = original - eps
        lower = loss_fn()
        tensor.values[index] = original
        grad[index] = (upper - lower) / (2.0 * eps)
    return grad
