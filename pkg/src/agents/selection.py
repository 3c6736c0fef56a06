"""
Survivor selection
(mu, lambda) selection: survivors come only from the offspring pool,
parents never re-enter.
"""

from typing import List, Sequence, Tuple

from ..engine.errors import ContractError
from .population import Individual

ORDERS = ("min", "max")


def select_survivors(offspring: Sequence[Individual], k: int, order: str) -> Tuple[List[Individual], List[int]]:
    """
    Keep the k best offspring.

    order="max" keeps the largest fitness, order="min" the smallest. Ties keep
    pool order, which is (parent index, mutation index) as the pool is built.

    Returns:
        tuple: (survivors, their indices in the pool)
    """
    if order not in ORDERS:
        raise ContractError(f"Unknown selection order: {order}")
    if not 1 <= k <= len(offspring):
        raise ContractError(f"Cannot keep {k} survivors from {len(offspring)} offspring")
    missing = [i for i, o in enumerate(offspring) if o.fitness is None]
    if missing:
        raise ContractError(f"Offspring {missing} have not been evaluated")

    sign = -1.0 if order == "max" else 1.0
    ranked = sorted(range(len(offspring)), key=lambda i: sign * offspring[i].fitness)
    chosen = ranked[:k]
    return [offspring[i] for i in chosen], chosen
