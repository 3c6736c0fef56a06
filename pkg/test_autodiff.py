"""Tests for the reverse-mode autodiff engine."""

import numpy as np
import pytest

from src.engine.autodiff import (
    ComputationGraph,
    Tensor,
    backward,
    finite_difference_grad,
    forward_op,
    grad_l2_norm,
    softmax,
)
from src.engine.errors import ContractError, DomainError, NumericalError, ShapeError


def _relative_error(analytic, numeric):
    return np.max(np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric)))


def test_forward_op_examples():
    graph = ComputationGraph()
    assert graph.relu(Tensor([-1.0, 0.0, 2.0])).values.tolist() == [0.0, 0.0, 2.0]
    assert graph.sigmoid(Tensor([0.0])).values.tolist() == [0.5]
    product = forward_op(graph, "matmul", [Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]])])
    assert product.values.tolist() == [[11.0]]


def test_backward_square_mean():
    w = Tensor([3.0], requires_grad=True)
    graph = ComputationGraph()
    backward(graph, graph.mean(graph.square(w)))
    assert w.grad.tolist() == [6.0]


def test_backward_log_sigmoid():
    x = Tensor([0.0], requires_grad=True)
    graph = ComputationGraph()
    backward(graph, graph.mean(graph.log(graph.sigmoid(x))))
    assert x.grad[0] == pytest.approx(0.5, abs=1e-15)


def test_backward_accumulates_over_reused_inputs():
    x = Tensor([2.0], requires_grad=True)
    graph = ComputationGraph()
    backward(graph, graph.mean(graph.mul(x, x)))
    assert x.grad[0] == pytest.approx(4.0)


def test_unused_leaf_gets_zero_grad():
    x = Tensor([1.0], requires_grad=True)
    y = Tensor([5.0, 5.0], requires_grad=True)
    graph = ComputationGraph()
    graph.leaf(y)
    backward(graph, graph.mean(graph.square(x)))
    assert y.grad.tolist() == [0.0, 0.0]


def test_constant_receives_no_grad():
    x = Tensor([1.0, 2.0], requires_grad=True)
    graph = ComputationGraph()
    c = graph.constant([3.0, 4.0])
    backward(graph, graph.mean(graph.mul(x, c)))
    assert c.grad is None
    np.testing.assert_allclose(x.grad, [1.5, 2.0])


def test_backward_rejects_non_scalar_root():
    x = Tensor([1.0, 2.0], requires_grad=True)
    graph = ComputationGraph()
    with pytest.raises(ContractError):
        backward(graph, graph.square(x))


def test_domain_and_shape_errors():
    graph = ComputationGraph()
    with pytest.raises(DomainError):
        graph.log(Tensor([0.0, 1.0]))
    with pytest.raises(DomainError):
        graph.sqrt(Tensor([-1.0]))
    with pytest.raises(ShapeError):
        graph.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        graph.add(Tensor([1.0]), Tensor([1.0, 2.0]))


def test_non_finite_results_raise():
    graph = ComputationGraph()
    with pytest.raises(NumericalError):
        graph.exp(Tensor([1000.0]))
    with pytest.raises(NumericalError):
        Tensor([np.nan])


def test_grad_l2_norm_examples():
    a = Tensor([0.0, 0.0])
    a.grad = np.array([3.0, 4.0])
    assert grad_l2_norm([a]) == 5.0

    b, c = Tensor([0.0, 0.0]), Tensor([0.0])
    b.grad, c.grad = np.zeros(2), np.zeros(1)
    assert grad_l2_norm([b, c]) == 0.0

    parts = [Tensor([0.0]) for _ in range(3)]
    for part, g in zip(parts, [1.0, 2.0, 2.0]):
        part.grad = np.array([g])
    assert grad_l2_norm(parts) == 3.0


def test_grad_l2_norm_requires_grads():
    with pytest.raises(ContractError):
        grad_l2_norm([Tensor([1.0])])


def _chain_loss(graph, x, w, b):
    h = graph.add_bias(graph.matmul(x, w), b)
    activated = graph.mul(graph.tanh(h), graph.leaky_relu(h, 0.2))
    squashed = graph.clamp(graph.sigmoid(activated), 1e-7, 1.0 - 1e-7)
    norm = graph.sqrt(graph.add_scalar(graph.sum_rows(graph.square(graph.transpose(graph.transpose(h)))), 1e-12))
    return graph.add(
        graph.mean(graph.log(squashed)),
        graph.scalar_mul(graph.mean(graph.mul(norm, graph.exp(graph.neg(norm)))), 0.3),
    )


def test_op_chain_matches_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
        b = Tensor(rng.normal(size=5), requires_grad=True)

        def loss_fn():
            graph = ComputationGraph()
            return _chain_loss(graph, x, w, b).item()

        graph = ComputationGraph()
        backward(graph, _chain_loss(graph, x, w, b))
        for tensor in (x, w, b):
            numeric = finite_difference_grad(loss_fn, tensor)
            assert _relative_error(tensor.grad, numeric) < 1e-4


def test_soft_combine_gradient():
    losses = [Tensor(v, requires_grad=True) for v in (0.3, -0.2, 1.1)]
    delta = 0.7
    graph = ComputationGraph()
    total = graph.soft_combine(losses, delta)
    backward(graph, total)

    values = np.array([0.3, -0.2, 1.1])
    w = softmax(delta * values)
    assert total.item() == pytest.approx(float(np.dot(w, values)), abs=1e-15)
    expected = w * (1.0 + delta * (values - np.dot(w, values)))
    np.testing.assert_allclose([t.grad.item() for t in losses], expected, rtol=1e-12)

    for tensor in losses:
        def loss_fn():
            return ComputationGraph().soft_combine(losses, delta).item()

        assert tensor.grad.item() == pytest.approx(finite_difference_grad(loss_fn, tensor).item(), rel=1e-6)


def test_backward_is_linear_in_the_root():
    rng = np.random.default_rng(11)
    x = Tensor(rng.normal(size=(3, 2)), requires_grad=True)

    graph = ComputationGraph()
    backward(graph, graph.mean(graph.square(x)))
    single = x.grad.copy()

    graph = ComputationGraph()
    backward(graph, graph.scalar_mul(graph.mean(graph.square(x)), 2.5))
    np.testing.assert_allclose(x.grad, 2.5 * single, rtol=1e-14)


def test_backward_of_a_weighted_sum_is_the_weighted_sum_of_gradients():
    rng = np.random.default_rng(12)
    x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)

    def first(graph):
        graph.leaf(w)
        return graph.mean(graph.square(x))

    def second(graph):
        return graph.mean(graph.tanh(graph.matmul(x, w)))

    grads = []
    for loss in (first, second):
        graph = ComputationGraph()
        backward(graph, loss(graph))
        grads.append((x.grad.copy(), w.grad.copy()))

    for a, b in [(1.0, 1.0), (2.5, -0.75), (-3.0, 0.1)]:
        graph = ComputationGraph()
        backward(graph, graph.add(graph.scalar_mul(first(graph), a), graph.scalar_mul(second(graph), b)))
        np.testing.assert_allclose(x.grad, a * grads[0][0] + b * grads[1][0], rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(w.grad, a * grads[0][1] + b * grads[1][1], rtol=1e-12, atol=1e-15)


def test_backward_is_deterministic():
    rng = np.random.default_rng(5)
    x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    b = Tensor(rng.normal(size=2), requires_grad=True)

    grads = []
    for _ in range(2):
        graph = ComputationGraph()
        backward(graph, _chain_loss(graph, x, w, b))
        grads.append(w.grad.copy())
    assert np.array_equal(grads[0], grads[1])


def test_softmax_is_shift_stable():
    np.testing.assert_allclose(softmax(np.array([1000.0, 1000.0])), [0.5, 0.5])
