"""
Fitness
Scores for evolved offspring. Generators: quality (weighted mean
discriminator output) plus gamma times diversity (minus weighted
log-gradient-norm of the discriminators' BCE loss). Discriminators: minus
log-gradient-norm of their own BCE loss.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..engine.autodiff import ComputationGraph, backward, grad_l2_norm
from ..engine.errors import ContractError
from ..engine.nets import ParamSet, forward_discriminator
from .objectives import SoftWeights, bce_loss, fake_batch, generate, soft_weights

logger = logging.getLogger(__name__)

NORM_FLOOR = 1e-12
WEIGHT_MODES = ("heuristic", "uniform")


@dataclass(frozen=True)
class GFitness:
    quality: float
    diversity: float
    gamma: float
    combined: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "combined", fitness_combined(self.quality, self.diversity, self.gamma))


def fitness_combined(q: float, d: float, gamma: float) -> float:
    """F_G = quality + gamma * diversity"""
    if not 0.0 < gamma <= 1.0:
        raise ContractError(f"gamma must lie in (0, 1], got {gamma}")
    return q + gamma * d


def neg_log_norm(norm: float) -> float:
    """-log of a gradient norm, floored at 1e-12 so a vanishing gradient stays finite"""
    return -math.log(max(norm, NORM_FLOOR))


def discriminator_grad_norm(disc: ParamSet, real: np.ndarray, gen_samples: np.ndarray) -> float:
    """||grad_phi BCE(D; real, fake)||, computed on a private copy so the caller's grads stay untouched"""
    scratch = disc.clone()
    graph = ComputationGraph()
    loss = bce_loss(scratch, real, gen_samples, graph)
    backward(graph, loss)
    return grad_l2_norm(scratch)


def diversity_from_norms(norms: Sequence[float], weights: SoftWeights) -> float:
    if len(norms) != len(weights):
        raise ContractError(f"{len(norms)} gradient norms for {len(weights)} weights")
    return float(sum(w * neg_log_norm(n) for w, n in zip(weights.w, norms)))


def _mean_outputs(discs: Sequence[ParamSet], samples: np.ndarray) -> np.ndarray:
    return np.array([forward_discriminator(d, samples).values.mean() for d in discs])


def fitness_quality(gen: ParamSet, discs: Sequence[ParamSet], z: np.ndarray, weights: SoftWeights) -> float:
    """sum_i w_i * mean D_i(G(z)) on the sigmoid head"""
    means = _mean_outputs(discs, generate(gen, z))
    return float(np.dot(weights.w, means))


def fitness_diversity(
    gen: ParamSet,
    discs: Sequence[ParamSet],
    real: np.ndarray,
    z: np.ndarray,
    weights: SoftWeights,
) -> float:
    """-sum_i w_i * log ||grad_phi_i BCE(D_i; real, G(z))||"""
    samples = generate(gen, z)
    return diversity_from_norms([discriminator_grad_norm(d, real, samples) for d in discs], weights)


def fitness_weights(
    discs: Sequence[ParamSet],
    samples: np.ndarray,
    delta: float,
    mode: str = "heuristic",
) -> SoftWeights:
    """
    Weights used inside F_G.

    "heuristic" takes the softmax over each discriminator's heuristic-mutation
    loss on the offspring's samples; "uniform" gives every discriminator 1/I.
    """
    if mode not in WEIGHT_MODES:
        raise ContractError(f"Unknown fitness weight mode: {mode}")
    if mode == "uniform":
        return soft_weights(np.zeros(len(discs)), 0.0)
    losses = [
        -0.5 * float(np.mean(np.log(forward_discriminator(d, samples).values)))
        for d in discs
    ]
    return soft_weights(losses, delta)


def evaluate_generator(
    gen: ParamSet,
    discs: Sequence[ParamSet],
    real: np.ndarray,
    z: np.ndarray,
    gamma: float,
    delta: float,
    weight_mode: str = "heuristic",
) -> GFitness:
    """
    Full F_G of one offspring on an evaluation batch.

    The same SoftWeights instance feeds both the quality and the diversity term.
    """
    samples = generate(gen, z)
    weights = fitness_weights(discs, samples, delta, weight_mode)
    quality = float(np.dot(weights.w, _mean_outputs(discs, samples)))
    diversity = diversity_from_norms([discriminator_grad_norm(d, real, samples) for d in discs], weights)
    return GFitness(quality=quality, diversity=diversity, gamma=gamma)


def fitness_discriminator(
    disc: ParamSet,
    generators: Sequence[ParamSet],
    real: np.ndarray,
    z: np.ndarray,
) -> float:
    """F_D = -log ||grad_phi BCE(D; real, fake)||, fake drawn from the generator parents"""
    return neg_log_norm(discriminator_grad_norm(disc, real, fake_batch(generators, z)))
