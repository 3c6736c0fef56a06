"""
E-Discriminators Agent
Evolves the discriminator subpopulation: D-variation (one Adam step per
mutation), D-evaluation (minus log-gradient-norm) and D-selection.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from config import TrainConfig
from ..benchmark.data import BatchSampler
from ..engine.autodiff import ComputationGraph, backward
from ..engine.errors import NumericalError
from ..engine.nets import ParamSet, adam_step
from .fitness import discriminator_grad_norm, neg_log_norm
from .objectives import d_training_loss, fake_batch
from .population import Individual, PopulationState
from .selection import select_survivors

logger = logging.getLogger(__name__)


@dataclass
class RoundResult:
    """Outcome of one variation -> evaluation -> selection round"""

    survivors: List[Individual]
    offspring: List[Individual]
    survivor_indices: List[int]
    grad_norms: List[float] = field(default_factory=list)

    @property
    def fitness(self) -> List[float]:
        return [o.fitness for o in self.offspring]


class DiscriminatorEvolver:
    def __init__(self, config: TrainConfig, sampler: BatchSampler):
        self.name = "e_discriminators"
        self.description = "Evolves I discriminator parents through N mutation offspring each"
        self.config = config
        self.sampler = sampler

        self.evolution_config = {
            "parents": config.d_parents,
            "offspring_per_parent": config.d_offspring,
            "mutations": list(config.d_mutations),
            "batch_size": config.batch_size,
            "select_order": config.d_select_order,
            "gp_lambda": config.gp_lambda,
        }

    def evolve(self, population: PopulationState) -> RoundResult:
        """
        Run one E-Discriminators round against the current generator parents

        Args:
            population (PopulationState): Current parents of both subpopulations

        Returns:
            RoundResult: New discriminator parents plus the scored offspring pool
        """
        generators = population.generators
        offspring: List[Individual] = []
        for index, parent in enumerate(population.d_parents):
            offspring.extend(self.vary(index, parent, generators))

        grad_norms = self.evaluate(offspring, generators)
        survivors, indices = select_survivors(
            offspring, self.evolution_config["parents"], self.evolution_config["select_order"]
        )
        logger.debug(
            f"D-selection kept {[offspring[i].mutation for i in indices]} "
            f"(fitness {[round(offspring[i].fitness, 4) for i in indices]})"
        )
        return RoundResult(survivors=survivors, offspring=offspring, survivor_indices=indices, grad_norms=grad_norms)

    def vary(self, parent_index: int, parent: Individual, generators: Sequence[ParamSet]) -> List[Individual]:
        """
        Produce N offspring, one Adam step each on its mutation's loss

        Offspring cycle through the mutation list; each full cycle draws a
        fresh real batch and a fresh fake batch from the generator parents.
        """
        mutations = self.evolution_config["mutations"]
        batch_size = self.evolution_config["batch_size"]
        batches: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        children = []

        for n in range(self.evolution_config["offspring_per_parent"]):
            cycle, kind = n // len(mutations), mutations[n % len(mutations)]
            if cycle not in batches:
                real, z = self.sampler.variation_batch(batch_size)
                batches[cycle] = (real, fake_batch(generators, z))
            real, fake = batches[cycle]

            child = parent.spawn(kind, lineage=parent_index)
            graph = ComputationGraph()
            loss = d_training_loss(
                kind,
                child.genome,
                fake,
                real,
                graph,
                gp_lambda=self.evolution_config["gp_lambda"],
                gp_rng=self.sampler.penalty,
            )
            backward(graph, loss)
            adam_step(child.genome, child.optimizer)
            child.variation_loss = loss.item()
            children.append(child)

        return children

    def evaluate(self, offspring: Sequence[Individual], generators: Sequence[ParamSet]) -> List[float]:
        """
        Score every offspring on one shared evaluation batch

        Returns:
            list: Gradient norms behind each fitness value
        """
        real, z = self.sampler.evaluation_batch(self.evolution_config["batch_size"])
        fake = fake_batch(generators, z)
        norms = []
        for child in offspring:
            norm = discriminator_grad_norm(child.genome, real, fake)
            child.fitness = neg_log_norm(norm)
            if not math.isfinite(child.fitness):
                raise NumericalError(f"Non-finite discriminator fitness (gradient norm {norm})")
            norms.append(norm)
        return norms
