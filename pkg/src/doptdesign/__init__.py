"""Constrained D-optimal experimental design.

Integer designs via pricing-based local search, continuous relaxations via
column generation, and dual certificates that bound the optimum from above.
"""

__version__ = "0.1.0"

from .model import (
    ExperimentSpace,
    MonomialModel,
    Instance,
    build_full_first_order,
    build_second_order_pairs,
    generate_cardinality_instance,
    generate_knapsack_instance,
    generate_second_order_knapsack_instance,
)

__all__ = [
    "ExperimentSpace",
    "MonomialModel",
    "Instance",
    "build_full_first_order",
    "build_second_order_pairs",
    "generate_cardinality_instance",
    "generate_knapsack_instance",
    "generate_second_order_knapsack_instance",
]
