"""
Evolution Agents Module
This module contains the two co-evolving subpopulations (E-Generators and
E-Discriminators) together with the losses, fitness and selection they share.
"""

from .discriminator_evolver import DiscriminatorEvolver, RoundResult
from .generator_evolver import GeneratorEvolver
from .population import Individual, PopulationState
from .selection import select_survivors

__all__ = [
    'DiscriminatorEvolver',
    'GeneratorEvolver',
    'RoundResult',
    'Individual',
    'PopulationState',
    'select_survivors',
]
