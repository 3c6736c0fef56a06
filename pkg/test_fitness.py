"""Tests for generator and discriminator fitness."""

import math

import numpy as np
import pytest

from src.agents.fitness import (
    GFitness,
    discriminator_grad_norm,
    diversity_from_norms,
    evaluate_generator,
    fitness_combined,
    fitness_discriminator,
    fitness_diversity,
    fitness_quality,
    fitness_weights,
    neg_log_norm,
)
from src.agents.objectives import SoftWeights, generate, soft_weights
from src.agents.population import Individual
from src.agents.selection import select_survivors
from src.benchmark.data import GaussianRingSpec, RngStream
from src.engine.autodiff import Tensor
from src.engine.errors import ContractError
from src.engine.nets import AdamState, MlpSpec, ParamSet, build_mlp, mlp_spec


def _constant_disc(probability, seed=0):
    params = build_mlp(mlp_spec("mlp3", "discriminator", hidden_units=4), RngStream(seed))
    for tensor in params:
        tensor.values[...] = 0.0
    params.tensors[-1].values[...] = math.log(probability / (1.0 - probability))
    return params


def _generator(seed=0):
    return build_mlp(mlp_spec("mlp3", "generator", noise_dim=3, hidden_units=4), RngStream(seed))


def _noise(n=6, seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, (n, 3))


def test_fitness_quality_examples():
    gen, z = _generator(), _noise()
    halves = [_constant_disc(0.5), _constant_disc(0.5, seed=1)]
    assert fitness_quality(gen, halves, z, soft_weights([0.2, 1.4], 1.0)) == pytest.approx(0.5, abs=1e-12)
    assert fitness_quality(gen, [_constant_disc(0.9)], z, soft_weights([0.0], 1.0)) == pytest.approx(0.9, abs=1e-12)

    weights = SoftWeights(w=np.array([2 / 3, 1 / 3]), delta=1.0)
    pair = [_constant_disc(0.6), _constant_disc(0.3)]
    assert fitness_quality(gen, pair, z, weights) == pytest.approx(0.5, abs=1e-12)


def test_diversity_from_norms_examples():
    assert diversity_from_norms([1.0, 1.0], soft_weights([0.3, 0.7], 1.0)) == 0.0
    assert diversity_from_norms([math.exp(-1.0)], soft_weights([0.0], 1.0)) == pytest.approx(1.0, abs=1e-15)


def test_diversity_falls_as_norms_grow():
    weights = soft_weights([0.1, -0.3, 0.5], 1.0)
    rng = np.random.default_rng(0)
    for _ in range(100):
        norms = rng.uniform(0.01, 10.0, 3)
        grown = norms.copy()
        grown[rng.integers(3)] *= rng.uniform(1.01, 5.0)
        assert diversity_from_norms(grown, weights) < diversity_from_norms(norms, weights)


@pytest.mark.parametrize("n_discs", [1, 2, 4, 8])
def test_scaling_every_norm_shifts_diversity_by_log_scale(n_discs):
    rng = np.random.default_rng(100 + n_discs)
    for _ in range(20):
        weights = soft_weights(rng.normal(0.0, 2.0, n_discs), rng.uniform(0.0, 3.0))
        norms = rng.uniform(0.01, 10.0, n_discs)
        base = diversity_from_norms(norms, weights)
        for c in (1e-3, 0.5, 1.0, 2.0, 37.0):
            expected = base - float(np.sum(weights.w)) * math.log(c)
            assert diversity_from_norms(c * norms, weights) == pytest.approx(expected, abs=1e-12)


def test_fitness_combined_examples():
    assert fitness_combined(0.5, 0.0, 0.3) == 0.5
    assert fitness_combined(0.5, 1.0, 0.1) == pytest.approx(0.6, abs=1e-15)
    assert fitness_combined(0.2, -0.2, 1.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ContractError):
        fitness_combined(0.5, 0.5, 0.0)
    with pytest.raises(ContractError):
        fitness_combined(0.5, 0.5, 1.5)


def test_gfitness_decomposition_is_exact():
    score = GFitness(quality=0.37, diversity=-1.23, gamma=0.1)
    assert score.combined == score.quality + score.gamma * score.diversity


def test_neg_log_norm_examples():
    assert neg_log_norm(1.0) == 0.0
    assert neg_log_norm(10.0) == pytest.approx(-2.302585092994046, abs=1e-12)
    assert math.isfinite(neg_log_norm(0.0))


def test_min_order_keeps_the_largest_norm():
    offspring = []
    for norm in (0.1, 10.0):
        params = _generator()
        individual = Individual(params, AdamState(params))
        individual.fitness = neg_log_norm(norm)
        offspring.append(individual)
    survivors, indices = select_survivors(offspring, 1, "min")
    assert indices == [1]
    assert survivors[0].fitness == pytest.approx(-2.302585, abs=1e-6)


def test_discriminator_fitness_agrees_with_generator_diversity():
    gen, z = _generator(3), _noise(seed=1)
    disc = build_mlp(mlp_spec("mlp3", "discriminator", hidden_units=4), RngStream(4))
    real = np.random.default_rng(2).normal(size=(6, 2))

    f_d = fitness_discriminator(disc, [gen], real, z)
    f_gd = diversity_from_norms([discriminator_grad_norm(disc, real, generate(gen, z))], soft_weights([0.0], 1.0))
    assert f_d == pytest.approx(f_gd, abs=1e-15)


def test_grad_norm_leaves_discriminator_untouched():
    disc = build_mlp(mlp_spec("mlp3", "discriminator", hidden_units=4), RngStream(5))
    real = np.random.default_rng(3).normal(size=(4, 2))
    norm = discriminator_grad_norm(disc, real, generate(_generator(), _noise(4)))
    assert norm > 0.0
    assert all(t.grad is None for t in disc)


def test_fitness_weight_modes():
    gen, z = _generator(), _noise()
    discs = [_constant_disc(0.8), _constant_disc(0.2, seed=1)]
    samples = generate(gen, z)

    heuristic = fitness_weights(discs, samples, 1.0, "heuristic")
    expected = soft_weights([-0.5 * math.log(0.8), -0.5 * math.log(0.2)], 1.0).w
    np.testing.assert_allclose(heuristic.w, expected, rtol=1e-12)
    assert heuristic.w[1] > heuristic.w[0]

    np.testing.assert_array_equal(fitness_weights(discs, samples, 1.0, "uniform").w, [0.5, 0.5])
    with pytest.raises(ContractError):
        fitness_weights(discs, samples, 1.0, "mean")


def test_evaluate_generator_combines_terms():
    gen, z = _generator(7), _noise(seed=5)
    discs = [build_mlp(mlp_spec("mlp3", "discriminator", hidden_units=4), RngStream(s)) for s in (8, 9)]
    real = np.random.default_rng(6).normal(size=(6, 2))
    score = evaluate_generator(gen, discs, real, z, gamma=0.1, delta=1.0)
    assert score.combined == pytest.approx(score.quality + 0.1 * score.diversity, abs=1e-15)
    assert 0.0 < score.quality < 1.0


def test_evaluate_generator_matches_separate_terms():
    gen, z = _generator(11), _noise(seed=12)
    discs = [build_mlp(mlp_spec("mlp3", "discriminator", hidden_units=4), RngStream(s)) for s in (13, 14, 15)]
    real = np.random.default_rng(16).normal(size=(6, 2))
    score = evaluate_generator(gen, discs, real, z, gamma=0.1, delta=1.0)

    weights = fitness_weights(discs, generate(gen, z), 1.0)
    assert score.quality == fitness_quality(gen, discs, z, weights)
    assert score.diversity == fitness_diversity(gen, discs, real, z, weights)


def _linear(role, weight, bias):
    spec = MlpSpec(layer_dims=((2, 1 if role == "discriminator" else 2),), activations=("sigmoid" if role == "discriminator" else "linear",), role=role)
    return ParamSet(spec, [Tensor(np.asarray(weight, dtype=float), requires_grad=True), Tensor(np.asarray(bias, dtype=float), requires_grad=True)])


def test_collapsed_generator_has_lower_diversity_than_spread_one():
    ring = GaussianRingSpec()
    real = np.vstack([ring.centers, ring.centers])
    angles = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False) + np.pi / 16
    z = 2.0 * np.column_stack([np.cos(angles), np.sin(angles)])

    spread = _linear("generator", np.eye(2), [0.0, 0.0])
    collapsed = _linear("generator", np.zeros((2, 2)), ring.centers[0])
    discs = [_linear("discriminator", [[0.0], [0.0]], [0.0]), _linear("discriminator", [[0.1], [0.0]], [0.0])]
    frozen = [d.flat_values().copy() for d in discs]

    spread_score = evaluate_generator(spread, discs, real, z, gamma=0.1, delta=1.0)
    collapsed_score = evaluate_generator(collapsed, discs, real, z, gamma=0.1, delta=1.0)

    assert collapsed_score.diversity < spread_score.diversity
    assert all(np.array_equal(d.flat_values(), f) for d, f in zip(discs, frozen))
