"""
Population types
Individuals of both subpopulations and the state carried between rounds.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from ..engine.nets import AdamState, ParamSet


@dataclass
class Individual:
    """
    One member of E-Generators or E-Discriminators.

    Attributes:
        genome: Network parameters
        optimizer: Adam state travelling with the genome
        mutation: Mutation kind that produced it ("init" for the initial parents)
        fitness: Score from the latest evaluation phase
        lineage: Index of the parent it was cloned from
        variation_loss: Loss value of the variation step that produced it
    """

    genome: ParamSet
    optimizer: AdamState
    mutation: str = "init"
    fitness: Optional[float] = None
    lineage: int = 0
    variation_loss: Optional[float] = None

    def spawn(self, mutation: str, lineage: int) -> "Individual":
        """Independent clone of genome and optimizer state, tagged with its mutation"""
        return Individual(
            genome=self.genome.clone(),
            optimizer=self.optimizer.clone(),
            mutation=mutation,
            lineage=lineage,
        )


@dataclass
class PopulationState:
    g_parents: List[Individual]
    d_parents: List[Individual]
    iteration: int = 0
    config: Dict[str, Any] = field(default_factory=dict)

    def best_generator_index(self) -> int:
        """Highest-F_G parent; the first parent while nothing has been scored"""
        scored = [(i, p.fitness) for i, p in enumerate(self.g_parents) if p.fitness is not None]
        if not scored:
            return 0
        return max(scored, key=lambda item: (item[1], -item[0]))[0]

    @property
    def generators(self) -> List[ParamSet]:
        return [p.genome for p in self.g_parents]

    @property
    def discriminators(self) -> List[ParamSet]:
        return [p.genome for p in self.d_parents]
