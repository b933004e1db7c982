"""Independent reference implementations used as test oracles.

Everything here recomputes from first principles (tour lists and the
distance matrix only) and stays deliberately naive: exhaustive dynamic
programs, full rebuild-and-simulate timing, brute-force enumeration.
"""

import math

from routesmith.model import Problem, insertion_delta


def tour_cost(instance, customers) -> float:
    if not customers:
        return 0.0
    total = instance.dist[0, customers[0]]
    for a, b in zip(customers, customers[1:]):
        total += instance.dist[a, b]
    total += instance.dist[customers[-1], 0]
    return float(total)


def recompute_objective(instance, tours, unassigned=()) -> float:
    total = sum(tour_cost(instance, t) for t in tours)
    total += sum(float(instance.prize[c]) for c in unassigned)
    return total


def simulate_tour(instance, customers):
    """Forward time simulation with waiting. Returns (feasible, start times)."""
    depart = 0.0
    prev = 0
    starts = []
    for c in customers:
        arrive = depart + instance.dist[prev, c]
        start = max(arrive, instance.tw_start[c])
        if start > instance.tw_end[c]:
            return False, starts
        starts.append(start)
        depart = start + instance.service[c]
        prev = c
    return True, starts


def splice_delta(instance, tour, position, customer):
    """Cost delta of inserting via full from-scratch recomputation."""
    new_tour = tour[:position] + [customer] + tour[position:]
    return tour_cost(instance, new_tour) - tour_cost(instance, tour)


def best_insertion(solution, customer):
    """Exhaustive argmin over every (tour, position) plus the new-tour
    option, lexicographic tie-break; mirrors the greedy commit rule."""
    best = math.inf
    best_slot = None
    for t in range(solution.n_tours):
        for p in range(len(solution.tour_customers(t)) + 1):
            delta = insertion_delta(solution, customer, t, p)
            if delta < best:
                best = delta
                best_slot = (t, p)
    delta = insertion_delta(solution, customer, solution.n_tours, 0)
    if delta < best:
        best = delta
        best_slot = (solution.n_tours, 0)
    return best_slot, best


def optimal_cvrp(instance) -> float:
    """Exact CVRP optimum: Held-Karp TSP costs for every capacity-feasible
    customer subset, then a min-cost set-partition DP. Exponential; only
    for desk-scale instances (n <= ~10)."""
    n = instance.num_customers
    D = instance.dist
    cap = instance.capacity
    demand = [int(instance.demand[i + 1]) for i in range(n)]
    size = 1 << n
    INF = math.inf

    dp = [[INF] * n for _ in range(size)]
    for j in range(n):
        dp[1 << j][j] = float(D[0, j + 1])
    for mask in range(1, size):
        row = dp[mask]
        for j in range(n):
            if not (mask >> j) & 1:
                continue
            cost_j = row[j]
            if cost_j == INF:
                continue
            for k in range(n):
                if (mask >> k) & 1:
                    continue
                cand = cost_j + float(D[j + 1, k + 1])
                nm = mask | (1 << k)
                if cand < dp[nm][k]:
                    dp[nm][k] = cand

    tour = [INF] * size
    sub_demand = [0] * size
    for mask in range(1, size):
        low_idx = (mask & -mask).bit_length() - 1
        sub_demand[mask] = sub_demand[mask & (mask - 1)] + demand[low_idx]
        if sub_demand[mask] > cap:
            continue
        best = INF
        for j in range(n):
            if (mask >> j) & 1 and dp[mask][j] < INF:
                cand = dp[mask][j] + float(D[j + 1, 0])
                if cand < best:
                    best = cand
        tour[mask] = best

    part = [INF] * size
    part[0] = 0.0
    for mask in range(1, size):
        low = mask & -mask
        sub = mask
        best = INF
        while sub:
            if sub & low and tour[sub] < INF:
                rest = part[mask ^ sub]
                if rest < INF:
                    cand = tour[sub] + rest
                    if cand < best:
                        best = cand
            sub = (sub - 1) & mask
        part[mask] = best
    return part[size - 1]
