"""routesmith: large neighborhood search for vehicle routing with
evolutionary discovery of removal/ordering operators."""

from .model import (
    FeasibilityReport,
    Instance,
    Problem,
    Solution,
    Tour,
    insertion_delta,
    insert_customer,
    objective,
    remove_customers,
    validate,
)
from .lns import LnsConfig, RunStats, accept, greedy_reinsert, initial_solution, run
from .operators import OperatorPair, builtin_pair

__version__ = "0.1.0"

__all__ = [
    "FeasibilityReport",
    "Instance",
    "LnsConfig",
    "OperatorPair",
    "Problem",
    "RunStats",
    "Solution",
    "Tour",
    "accept",
    "builtin_pair",
    "greedy_reinsert",
    "initial_solution",
    "insert_customer",
    "insertion_delta",
    "objective",
    "remove_customers",
    "run",
    "validate",
]
