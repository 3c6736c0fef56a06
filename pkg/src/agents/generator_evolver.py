"""
E-Generators Agent
Evolves the generator subpopulation: G-variation (one Adam step per
mutation against the soft-weighted discriminator ensemble), G-evaluation
(quality + gamma * diversity) and G-selection.
"""

import logging
import math
from typing import Dict, List, Sequence

import numpy as np

from config import TrainConfig
from ..benchmark.data import BatchSampler
from ..engine.autodiff import ComputationGraph, backward
from ..engine.errors import NumericalError
from ..engine.nets import ParamSet, adam_step
from .discriminator_evolver import RoundResult
from .fitness import GFitness, evaluate_generator
from .objectives import g_loss
from .population import Individual, PopulationState
from .selection import select_survivors

logger = logging.getLogger(__name__)


class GeneratorEvolver:
    def __init__(self, config: TrainConfig, sampler: BatchSampler):
        self.name = "e_generators"
        self.description = "Evolves J generator parents through M mutation offspring each"
        self.config = config
        self.sampler = sampler

        self.evolution_config = {
            "parents": config.g_parents,
            "offspring_per_parent": config.g_offspring,
            "mutations": list(config.g_mutations),
            "batch_size": config.batch_size,
            "gamma": config.gamma,
            "delta": config.delta,
            "fitness_weights": config.fitness_weights,
        }

        # F_G breakdown of the latest round, in offspring order
        self.last_scores: List[GFitness] = []

    def evolve(self, population: PopulationState) -> RoundResult:
        """
        Run one E-Generators round against the current discriminator parents

        Args:
            population (PopulationState): Current parents of both subpopulations

        Returns:
            RoundResult: New generator parents plus the scored offspring pool
        """
        discriminators = population.discriminators
        offspring: List[Individual] = []
        for index, parent in enumerate(population.g_parents):
            offspring.extend(self.vary(index, parent, discriminators))

        self.evaluate(offspring, discriminators)
        survivors, indices = select_survivors(offspring, self.evolution_config["parents"], "max")
        logger.debug(
            f"G-selection kept {[offspring[i].mutation for i in indices]} "
            f"(fitness {[round(offspring[i].fitness, 4) for i in indices]})"
        )
        return RoundResult(survivors=survivors, offspring=offspring, survivor_indices=indices)

    def vary(self, parent_index: int, parent: Individual, discriminators: Sequence[ParamSet]) -> List[Individual]:
        """Produce M offspring, one Adam step each on its soft-weighted mutation loss"""
        mutations = self.evolution_config["mutations"]
        noise: Dict[int, np.ndarray] = {}
        children = []

        for m in range(self.evolution_config["offspring_per_parent"]):
            cycle, kind = m // len(mutations), mutations[m % len(mutations)]
            if cycle not in noise:
                noise[cycle] = self.sampler.variation_noise(self.evolution_config["batch_size"])

            child = parent.spawn(kind, lineage=parent_index)
            graph = ComputationGraph()
            loss = g_loss(kind, child.genome, discriminators, noise[cycle], self.evolution_config["delta"], graph)
            backward(graph, loss)
            adam_step(child.genome, child.optimizer)
            child.variation_loss = loss.item()
            children.append(child)

        return children

    def evaluate(self, offspring: Sequence[Individual], discriminators: Sequence[ParamSet]) -> None:
        """Score every offspring with F_G on one shared evaluation batch"""
        real, z = self.sampler.evaluation_batch(self.evolution_config["batch_size"])
        self.last_scores = []
        for child in offspring:
            score = evaluate_generator(
                child.genome,
                discriminators,
                real,
                z,
                gamma=self.evolution_config["gamma"],
                delta=self.evolution_config["delta"],
                weight_mode=self.evolution_config["fitness_weights"],
            )
            if not math.isfinite(score.combined):
                raise NumericalError(f"Non-finite generator fitness for {child.mutation} offspring")
            child.fitness = score.combined
            self.last_scores.append(score)
