"""
Networks
MLP generator/discriminator architectures, their parameters as clonable
genomes, forward passes on the autodiff engine, and the Adam optimizer.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from .autodiff import DEFAULT_LEAKY_SLOPE, LOG_CLAMP, ComputationGraph, Tensor
from .errors import ContractError, NumericalError, ShapeError, SpecError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid", "linear")
ARCHITECTURES = ("mlp3", "mlp4")
INIT_STD = 0.02

Head = Literal["sigmoid", "raw"]
ArrayLike = Union[np.ndarray, Tensor]


@dataclass(frozen=True)
class MlpSpec:
    """
    Layer sizes and activations of a fully connected network.

    A discriminator's final activation is always "sigmoid"; whether it is
    applied is decided per call by the evaluation head, so one parameter set
    serves both the sigmoid and the least-squares losses.
    """

    layer_dims: Tuple[Tuple[int, int], ...]
    activations: Tuple[str, ...]
    role: Literal["generator", "discriminator"]
    data_dim: int = 2
    leaky_slope: float = DEFAULT_LEAKY_SLOPE

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(tuple(int(d) for d in dims) for dims in self.layer_dims))
        object.__setattr__(self, "activations", tuple(self.activations))

        if not self.layer_dims:
            raise SpecError("An MLP needs at least one layer")
        if len(self.layer_dims) != len(self.activations):
            raise SpecError(
                f"{len(self.layer_dims)} layers but {len(self.activations)} activations"
            )
        if self.role not in ("generator", "discriminator"):
            raise SpecError(f"Unknown role: {self.role}")
        for dims in self.layer_dims:
            if len(dims) != 2 or min(dims) <= 0:
                raise SpecError(f"Invalid layer dims: {dims}")
        for (_, out_dim), (in_dim, _) in zip(self.layer_dims, self.layer_dims[1:]):
            if out_dim != in_dim:
                raise SpecError(f"Layer dims do not chain: {out_dim} -> {in_dim}")
        unknown = [a for a in self.activations if a not in ACTIVATIONS]
        if unknown:
            raise SpecError(f"Unknown activations: {', '.join(unknown)}")

        final_out = self.layer_dims[-1][1]
        if self.role == "discriminator":
            if final_out != 1:
                raise SpecError(f"Discriminator must output 1 value, got {final_out}")
            if self.activations[-1] != "sigmoid":
                raise SpecError("Discriminator final activation must be sigmoid")
        elif final_out != self.data_dim:
            raise SpecError(f"Generator must output {self.data_dim} values, got {final_out}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0][0]

    @property
    def num_parameters(self) -> int:
        return sum(i * o + o for i, o in self.layer_dims)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["layer_dims"] = [list(d) for d in self.layer_dims]
        data["activations"] = list(self.activations)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MlpSpec":
        return cls(
            layer_dims=tuple(tuple(d) for d in data["layer_dims"]),
            activations=tuple(data["activations"]),
            role=data["role"],
            data_dim=data.get("data_dim", 2),
            leaky_slope=data.get("leaky_slope", DEFAULT_LEAKY_SLOPE),
        )


def mlp_spec(
    architecture: str,
    role: str,
    noise_dim: int = 256,
    hidden_units: int = 128,
    data_dim: int = 2,
) -> MlpSpec:
    """
    The two benchmark architectures.

    mlp3: generator ReLU-ReLU-linear, discriminator LeakyReLU-LeakyReLU-sigmoid.
    mlp4: generator ReLU x3 then linear, discriminator ReLU x3 then sigmoid.
    """
    if architecture not in ARCHITECTURES:
        raise SpecError(f"Unknown architecture: {architecture}")
    hidden_layers = 2 if architecture == "mlp3" else 3

    if role == "generator":
        in_dim, out_dim = noise_dim, data_dim
        hidden_act, final_act = "relu", "linear"
    elif role == "discriminator":
        in_dim, out_dim = data_dim, 1
        hidden_act = "leaky_relu" if architecture == "mlp3" else "relu"
        final_act = "sigmoid"
    else:
        raise SpecError(f"Unknown role: {role}")

    sizes = [in_dim] + [hidden_units] * hidden_layers + [out_dim]
    return MlpSpec(
        layer_dims=tuple(zip(sizes, sizes[1:])),
        activations=(hidden_act,) * hidden_layers + (final_act,),
        role=role,
        data_dim=data_dim,
    )


class ParamSet:
    """
    Ordered weight/bias tensors (W1, b1, W2, b2, ...) of one network.

    This is the genome of an evolutionary individual: clone() gives an
    independent copy that can be trained without touching the original.
    """

    def __init__(self, spec: MlpSpec, tensors: Sequence[Tensor]):
        expected = []
        for in_dim, out_dim in spec.layer_dims:
            expected.extend([(in_dim, out_dim), (out_dim,)])
        if len(tensors) != len(expected):
            raise ShapeError(f"Expected {len(expected)} tensors, got {len(tensors)}")
        for tensor, shape in zip(tensors, expected):
            if tensor.shape != shape:
                raise ShapeError(f"Tensor {tensor.name} has shape {tensor.shape}, expected {shape}")
        self.spec = spec
        self.tensors: List[Tensor] = list(tensors)

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def layers(self) -> List[Tuple[Tensor, Tensor]]:
        return list(zip(self.tensors[0::2], self.tensors[1::2]))

    @property
    def num_parameters(self) -> int:
        return sum(t.size for t in self.tensors)

    def clone(self) -> "ParamSet":
        return ParamSet(self.spec, [t.clone() for t in self.tensors])

    def zero_grad(self) -> None:
        for tensor in self.tensors:
            tensor.grad = None

    def flat_values(self) -> np.ndarray:
        return np.concatenate([t.values.reshape(-1) for t in self.tensors])


def build_mlp(spec: MlpSpec, rng) -> ParamSet:
    """
    Initialize a network: weights from N(0, 0.02^2), zero biases.

    Args:
        spec (MlpSpec): Architecture
        rng (RngStream): Seeded stream; same seed gives identical parameters
    """
    if not isinstance(spec, MlpSpec):
        raise SpecError(f"Expected an MlpSpec, got {type(spec).__name__}")
    tensors = []
    for layer, (in_dim, out_dim) in enumerate(spec.layer_dims, start=1):
        tensors.append(Tensor(rng.normal(0.0, INIT_STD, (in_dim, out_dim)), requires_grad=True, name=f"W{layer}"))
        tensors.append(Tensor(np.zeros(out_dim), requires_grad=True, name=f"b{layer}"))
    return ParamSet(spec, tensors)


def _as_input(graph: ComputationGraph, x: ArrayLike, expected_dim: int, what: str) -> Tensor:
    tensor = graph.leaf(x) if isinstance(x, Tensor) else graph.constant(x, name=what)
    if tensor.values.ndim != 2 or tensor.shape[1] != expected_dim:
        raise ShapeError(f"{what} must have shape (B, {expected_dim}), got {tensor.shape}")
    return tensor


def _activate(graph: ComputationGraph, h: Tensor, activation: str, slope: float) -> Tensor:
    if activation == "relu":
        return graph.relu(h)
    if activation == "leaky_relu":
        return graph.leaky_relu(h, slope)
    if activation == "tanh":
        return graph.tanh(h)
    if activation == "sigmoid":
        return graph.sigmoid(h)
    return h


def _hidden_stack(graph: ComputationGraph, params: ParamSet, x: Tensor):
    """Run every layer but the last; returns (output, [(pre-activation, activation), ...])"""
    spec = params.spec
    trace = []
    h = x
    for (weight, bias), activation in zip(params.layers()[:-1], spec.activations[:-1]):
        pre = graph.add_bias(graph.matmul(h, weight), bias)
        h = _activate(graph, pre, activation, spec.leaky_slope)
        trace.append((pre, h))
    return h, trace


def forward_generator(params: ParamSet, z: ArrayLike, graph: Optional[ComputationGraph] = None) -> Tensor:
    """Map a (B, noise_dim) noise batch to (B, data_dim) points"""
    if params.spec.role != "generator":
        raise SpecError("forward_generator needs generator parameters")
    graph = graph if graph is not None else ComputationGraph()
    x = _as_input(graph, z, params.spec.input_dim, "noise")
    h, _ = _hidden_stack(graph, params, x)
    weight, bias = params.layers()[-1]
    out = graph.add_bias(graph.matmul(h, weight), bias)
    return _activate(graph, out, params.spec.activations[-1], params.spec.leaky_slope)


def forward_discriminator(
    params: ParamSet,
    x: ArrayLike,
    head: Head = "sigmoid",
    graph: Optional[ComputationGraph] = None,
) -> Tensor:
    """
    Score a (B, data_dim) batch, returning (B, 1).

    head="sigmoid" gives probabilities clamped to [1e-7, 1 - 1e-7];
    head="raw" gives the unbounded pre-sigmoid output used by least-squares losses.
    """
    if params.spec.role != "discriminator":
        raise SpecError("forward_discriminator needs discriminator parameters")
    if head not in ("sigmoid", "raw"):
        raise ContractError(f"Unknown discriminator head: {head}")
    graph = graph if graph is not None else ComputationGraph()
    inputs = _as_input(graph, x, params.spec.input_dim, "points")
    h, _ = _hidden_stack(graph, params, inputs)
    weight, bias = params.layers()[-1]
    logits = graph.add_bias(graph.matmul(h, weight), bias)
    if head == "raw":
        return logits
    return graph.clamp(graph.sigmoid(logits), LOG_CLAMP, 1.0 - LOG_CLAMP)


def input_gradient(params: ParamSet, x: ArrayLike, graph: ComputationGraph) -> Tensor:
    """
    Gradient of the raw discriminator output with respect to its input, (B, data_dim).

    Built from ordinary graph ops, so the result stays differentiable with
    respect to the discriminator parameters. ReLU-family derivative masks
    are piecewise constant and enter as constants.
    """
    if params.spec.role != "discriminator":
        raise SpecError("input_gradient needs discriminator parameters")
    spec = params.spec
    inputs = _as_input(graph, x, spec.input_dim, "points")
    _, trace = _hidden_stack(graph, params, inputs)
    layers = params.layers()

    ones = graph.constant(np.ones((inputs.shape[0], 1)))
    grad = graph.matmul(ones, graph.transpose(layers[-1][0]))
    for (pre, post), activation, (weight, _) in zip(
        reversed(trace), reversed(spec.activations[:-1]), reversed(layers[:-1])
    ):
        if activation == "relu":
            grad = graph.mul(grad, graph.constant((pre.values > 0.0).astype(np.float64)))
        elif activation == "leaky_relu":
            grad = graph.mul(grad, graph.constant(np.where(pre.values > 0.0, 1.0, spec.leaky_slope)))
        elif activation == "tanh":
            grad = graph.mul(grad, graph.add_scalar(graph.neg(graph.square(post)), 1.0))
        elif activation == "sigmoid":
            grad = graph.mul(grad, graph.mul(post, graph.add_scalar(graph.neg(post), 1.0)))
        grad = graph.matmul(grad, graph.transpose(weight))
    return grad


class AdamState:
    """
    Adam moment accumulators for one ParamSet.

    Args:
        params (ParamSet): Parameters whose shapes the accumulators mirror
        lr (float): Step size alpha
        beta1 (float): First-moment decay
        beta2 (float): Second-moment decay
        eps (float): Denominator stabilizer
    """

    def __init__(
        self,
        params: ParamSet,
        lr: float = 0.0002,
        beta1: float = 0.5,
        beta2: float = 0.99,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = [np.zeros_like(t.values) for t in params]
        self.v = [np.zeros_like(t.values) for t in params]

    def clone(self) -> "AdamState":
        copy = AdamState.__new__(AdamState)
        copy.lr, copy.beta1, copy.beta2, copy.eps = self.lr, self.beta1, self.beta2, self.eps
        copy.step = self.step
        copy.m = [m.copy() for m in self.m]
        copy.v = [v.copy() for v in self.v]
        return copy

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "m": [m.reshape(-1).tolist() for m in self.m],
            "v": [v.reshape(-1).tolist() for v in self.v],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], params: ParamSet) -> "AdamState":
        state = cls(params, data["lr"], data["beta1"], data["beta2"], data["eps"])
        state.step = int(data["step"])
        state.m = [np.asarray(m, dtype=np.float64).reshape(t.shape) for m, t in zip(data["m"], params)]
        state.v = [np.asarray(v, dtype=np.float64).reshape(t.shape) for v, t in zip(data["v"], params)]
        return state


def adam_step(params: ParamSet, state: AdamState) -> None:
    """
    One bias-corrected Adam update, in place.

    Raises:
        ContractError: If any parameter has no gradient or shapes disagree
    """
    if len(state.m) != len(params):
        raise ContractError("Adam state does not match the parameter set")
    for tensor, m in zip(params, state.m):
        if tensor.grad is None:
            raise ContractError(f"Missing gradient on {tensor.name}")
        if m.shape != tensor.shape:
            raise ContractError(f"Adam accumulator shape {m.shape} != parameter shape {tensor.shape}")

    state.step += 1
    bias1 = 1.0 - state.beta1 ** state.step
    bias2 = 1.0 - state.beta2 ** state.step

    for tensor, m, v in zip(params, state.m, state.v):
        grad = tensor.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (grad * grad)
        m_hat = m / bias1
        v_hat = v / bias2
        tensor.values -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        if not np.all(np.isfinite(tensor.values)):
            raise NumericalError(f"Adam produced a non-finite value in {tensor.name}")
