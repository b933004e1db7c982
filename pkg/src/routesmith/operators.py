"""Built-in removal and ordering operators plus the operator-pair contract.

Operators are stateless: all randomness comes from the rng argument, and
they never mutate the solution they are given. Removal operators return
customer ids to detach; ordering operators return a permutation of the ids
they receive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError
from .model import Instance, Solution


@dataclass(frozen=True)
class OperatorPair:
    remove: Callable
    order: Callable
    label: str
    origin: str = "builtin"  # or "external-candidate"


def seed_random_remove(instance: Instance, solution: Solution, rng) -> list[int]:
    """Uniform random selection of 10..20 assigned customers (clamped)."""
    assigned = solution.assigned_ids()
    if assigned.size == 0:
        return []
    k = int(rng.integers(10, 21))
    k = min(k, assigned.size)
    picked = rng.choice(assigned, size=k, replace=False)
    return [int(c) for c in picked]


def seed_random_order(instance: Instance, ids, solution: Solution, rng) -> list[int]:
    """Uniform random permutation of the removed ids."""
    out = [int(c) for c in ids]
    rng.shuffle(out)
    return out


@dataclass(frozen=True)
class StringRemovalParams:
    """Bounds for the string-removal baseline; values chosen to match the
    seed operator's 10..20 removal scale."""

    max_string_len: int = 10
    avg_removed: int = 10
    max_strings: int = 4


def string_remove(
    instance: Instance,
    solution: Solution,
    rng,
    params: StringRemovalParams = StringRemovalParams(),
) -> list[int]:
    """Spatially correlated removal of contiguous tour strings.

    Picks a random seed customer, walks its distance-sorted adjacency, and
    removes one contiguous string from each tour encountered until the
    string budget or the removal target is exhausted.
    """
    assigned = solution.assigned_ids()
    if assigned.size == 0:
        return []
    target = int(rng.integers(max(1, params.avg_removed // 2), params.avg_removed * 2))
    seed = int(assigned[int(rng.integers(assigned.size))])

    removed: list[int] = []
    hit_tours: set[int] = set()
    tour_of = solution._tour_of
    for c in [seed] + [int(x) for x in instance.adjacency[seed]]:
        if len(hit_tours) >= params.max_strings or len(removed) >= target:
            break
        if c == 0:
            continue
        t = int(tour_of[c])
        if t < 0 or t in hit_tours:
            continue
        tour = solution.tour_customers(t)
        length = int(rng.integers(1, min(params.max_string_len, len(tour)) + 1))
        pos = tour.index(c)
        lo = max(0, min(pos - int(rng.integers(length)), len(tour) - length))
        removed.extend(tour[lo : lo + length])
        hit_tours.add(t)
    return removed


_SORT_KEYS = ("demand_desc", "depot_distance_desc", "random")


def sort_by_key(instance: Instance, ids, solution: Solution, rng, key: str) -> list[int]:
    """Stable sort of ids by the named key; ties fall back to ascending id."""
    out = [int(c) for c in ids]
    if key == "random":
        rng.shuffle(out)
        return out
    if key == "demand_desc":
        return sorted(out, key=lambda c: (-instance.demand[c], c))
    if key == "depot_distance_desc":
        return sorted(out, key=lambda c: (-instance.dist[0, c], c))
    raise ConfigError(f"unknown sort key: {key!r}")


_REMOVE_BUILTINS: dict[str, Callable] = {
    "seed_random": seed_random_remove,
    "string": string_remove,
}

_ORDER_BUILTINS: dict[str, Callable] = {
    "random": seed_random_order,
    "demand_desc": lambda inst, ids, sol, rng: sort_by_key(inst, ids, sol, rng, "demand_desc"),
    "depot_distance_desc": lambda inst, ids, sol, rng: sort_by_key(
        inst, ids, sol, rng, "depot_distance_desc"
    ),
}


def remove_labels() -> list[str]:
    return sorted(_REMOVE_BUILTINS)


def order_labels() -> list[str]:
    return sorted(_ORDER_BUILTINS)


def builtin_pair(remove_label: str = "seed_random", order_label: str = "random") -> OperatorPair:
    """Resolve removal/ordering labels to a builtin operator pair."""
    try:
        remove = _REMOVE_BUILTINS[remove_label]
    except KeyError:
        raise ConfigError(
            f"unknown removal operator {remove_label!r}; available: {remove_labels()}"
        ) from None
    try:
        order = _ORDER_BUILTINS[order_label]
    except KeyError:
        raise ConfigError(
            f"unknown ordering operator {order_label!r}; available: {order_labels()}"
        ) from None
    return OperatorPair(remove=remove, order=order, label=f"{remove_label}/{order_label}")
