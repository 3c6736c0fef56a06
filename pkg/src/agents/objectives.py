"""
Adversarial Objectives
The three generator mutations, the two discriminator mutations, the soft
(softmax-weighted) ensemble over discriminators and the optional
interpolation gradient penalty.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..engine.autodiff import ComputationGraph, Tensor, softmax
from ..engine.errors import ContractError, ShapeError
from ..engine.nets import ParamSet, forward_discriminator, forward_generator, input_gradient

logger = logging.getLogger(__name__)

G_MUTATIONS = ("minimax", "heuristic", "least_squares")
D_MUTATIONS = ("minimax", "least_squares")

# Evaluation head each mutation reads the discriminator through
HEADS = {
    "minimax": "sigmoid",
    "heuristic": "sigmoid",
    "least_squares": "raw",
}

GP_NORM_EPS = 1e-12


@dataclass(frozen=True)
class SoftWeights:
    """Softmax weights over I discriminators"""

    w: np.ndarray
    delta: float

    def __len__(self):
        return len(self.w)


def soft_weights(per_disc_losses: Sequence[float], delta: float) -> SoftWeights:
    """
    w_i = exp(delta * l_i) / sum_t exp(delta * l_t), max-shifted for stability.

    delta = 0 gives equal weights; larger delta favours the discriminator
    the generator currently does worst against.
    """
    losses = np.asarray(per_disc_losses, dtype=np.float64).reshape(-1)
    if losses.size == 0:
        raise ContractError("soft_weights needs at least one loss")
    if not np.all(np.isfinite(losses)):
        raise ContractError("soft_weights got a non-finite loss")
    if delta < 0:
        raise ContractError(f"delta must be non-negative, got {delta}")
    return SoftWeights(w=softmax(delta * losses), delta=float(delta))


def _one_minus(graph: ComputationGraph, p: Tensor) -> Tensor:
    return graph.add_scalar(graph.neg(p), 1.0)


def g_loss_term(kind: str, graph: ComputationGraph, disc: ParamSet, fake: Tensor) -> Tensor:
    """Per-discriminator generator loss l_i for one mutation kind"""
    if kind not in G_MUTATIONS:
        raise ContractError(f"Unknown generator mutation: {kind}")
    out = forward_discriminator(disc, fake, head=HEADS[kind], graph=graph)
    if kind == "minimax":
        return graph.scalar_mul(graph.mean(graph.log(_one_minus(graph, out))), 0.5)
    if kind == "heuristic":
        return graph.scalar_mul(graph.mean(graph.log(out)), -0.5)
    return graph.mean(graph.square(graph.add_scalar(out, -1.0)))


def g_loss(
    kind: str,
    gen: ParamSet,
    discs: Sequence[ParamSet],
    z: np.ndarray,
    delta: float,
    graph: Optional[ComputationGraph] = None,
) -> Tensor:
    """
    Soft-weighted generator loss sum_i w_i * l_i over all discriminators.

    The weights are computed inside the graph from the same batch's l_i,
    so the gradient also flows through the softmax.
    """
    if not discs:
        raise ContractError("g_loss needs at least one discriminator")
    graph = graph if graph is not None else ComputationGraph()
    fake = forward_generator(gen, z, graph)
    terms = [g_loss_term(kind, graph, disc, fake) for disc in discs]
    return graph.soft_combine(terms, delta)


def _check_batches(gen_samples, real) -> None:
    if len(gen_samples) == 0 or len(real) == 0:
        raise ContractError("Discriminator losses need non-empty real and generated batches")


def d_loss(
    kind: str,
    disc: ParamSet,
    gen_samples: np.ndarray,
    real: np.ndarray,
    graph: Optional[ComputationGraph] = None,
) -> Tensor:
    """
    Discriminator objective for one mutation kind.

    minimax: mean log D(x) + mean log(1 - D(G(z))), to be maximized.
    least_squares: 0.5 mean (D(x) - 1)^2 + 0.5 mean D(G(z))^2 on the raw head, to be minimized.
    Generated samples enter as constants, so nothing flows back to a generator.
    """
    if kind not in D_MUTATIONS:
        raise ContractError(f"Unknown discriminator mutation: {kind}")
    _check_batches(gen_samples, real)
    graph = graph if graph is not None else ComputationGraph()
    fake = graph.constant(np.asarray(gen_samples), name="generated")
    head = HEADS[kind]
    on_real = forward_discriminator(disc, real, head=head, graph=graph)
    on_fake = forward_discriminator(disc, fake, head=head, graph=graph)

    if kind == "minimax":
        return graph.add(
            graph.mean(graph.log(on_real)),
            graph.mean(graph.log(_one_minus(graph, on_fake))),
        )
    return graph.add(
        graph.scalar_mul(graph.mean(graph.square(graph.add_scalar(on_real, -1.0))), 0.5),
        graph.scalar_mul(graph.mean(graph.square(on_fake)), 0.5),
    )


def bce_loss(
    disc: ParamSet,
    real: np.ndarray,
    gen_samples: np.ndarray,
    graph: Optional[ComputationGraph] = None,
) -> Tensor:
    """Binary cross-entropy -(mean log D(x) + mean log(1 - D(G(z)))), the loss whose gradient norm scores fitness"""
    graph = graph if graph is not None else ComputationGraph()
    return graph.neg(d_loss("minimax", disc, gen_samples, real, graph))


def gradient_penalty(
    disc: ParamSet,
    real: np.ndarray,
    fake: np.ndarray,
    rng,
    lam: float,
    graph: Optional[ComputationGraph] = None,
) -> Tensor:
    """
    lam * mean[(||grad_x D(x_hat)|| - 1)^2] with x_hat = u*x + (1-u)*G(z), u ~ U[0, 1] per row.

    The gradient is taken on the raw discriminator output.
    """
    if lam < 0:
        raise ContractError(f"Gradient penalty weight must be non-negative, got {lam}")
    graph = graph if graph is not None else ComputationGraph()
    if lam == 0:
        return graph.constant(0.0, name="gp_off")

    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if real.shape != fake.shape:
        raise ShapeError(f"Gradient penalty needs equal batches, got {real.shape} and {fake.shape}")
    _check_batches(fake, real)

    u = rng.uniform(0.0, 1.0, (len(real), 1))
    interpolated = u * real + (1.0 - u) * fake
    grad = input_gradient(disc, interpolated, graph)
    norm = graph.sqrt(graph.add_scalar(graph.sum_rows(graph.square(grad)), GP_NORM_EPS))
    penalty = graph.mean(graph.square(graph.add_scalar(norm, -1.0)))
    return graph.scalar_mul(penalty, lam)


def d_training_loss(
    kind: str,
    disc: ParamSet,
    gen_samples: np.ndarray,
    real: np.ndarray,
    graph: ComputationGraph,
    gp_lambda: float = 0.0,
    gp_rng=None,
) -> Tensor:
    """Loss an offspring minimizes in one D-variation step (negated objective for minimax, plus GP)"""
    objective = d_loss(kind, disc, gen_samples, real, graph)
    loss = graph.neg(objective) if kind == "minimax" else objective
    if gp_lambda > 0:
        batch = min(len(real), len(gen_samples))
        penalty = gradient_penalty(disc, real[:batch], gen_samples[:batch], gp_rng, gp_lambda, graph)
        loss = graph.add(loss, penalty)
    return loss


def generate(gen: ParamSet, z: np.ndarray) -> np.ndarray:
    """Generator output as a plain array (no graph kept)"""
    return forward_generator(gen, z).values


def fake_batch(generators: Sequence[ParamSet], z: np.ndarray) -> np.ndarray:
    """
    Route equal shares of one noise batch through each generator parent.

    With one generator this is just G(z).
    """
    if not generators:
        raise ContractError("Need at least one generator to produce a fake batch")
    shares: List[np.ndarray] = np.array_split(np.asarray(z), len(generators))
    return np.concatenate([generate(gen, share) for gen, share in zip(generators, shares) if len(share)])
