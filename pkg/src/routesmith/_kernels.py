"""Compiled hot loops over the array-backed solution state.

All functions operate on the raw arrays owned by ``model.Solution``:
``nodes`` (padded 2D customer ids per tour row), ``lens``, ``tdem``,
``tcost``, the VRPTW timing rows ``estart``/``lstart``, the customer-to-tour
index and the unassigned mask. Problem codes: 0 = CVRP, 1 = VRPTW,
2 = PCVRP.

Float expressions here are mirrored verbatim by the pure-Python
``model.insertion_delta`` so both paths make bit-identical placement
decisions. Keep them in sync.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


CVRP = 0
VRPTW = 1
PCVRP = 2


@njit(cache=True)
def retime_forward(nodes, lens, estart, t, dist, service, tws):
    """Recompute earliest service starts for tour row t (waiting allowed)."""
    L = lens[t]
    depart = 0.0
    prev = 0
    for k in range(L):
        c = nodes[t, k]
        arrive = depart + dist[prev, c]
        start = arrive if arrive > tws[c] else tws[c]
        estart[t, k] = start
        depart = start + service[c]
        prev = c


@njit(cache=True)
def retime_backward(nodes, lens, lstart, t, dist, service, twe):
    """Recompute latest feasible service starts for tour row t.

    The return leg to the depot is unconstrained, so the last customer's
    bound is its own window end.
    """
    L = lens[t]
    nxt_latest = np.inf
    nxt = 0
    for k in range(L - 1, -1, -1):
        c = nodes[t, k]
        if k == L - 1:
            latest = twe[c]
        else:
            bound = nxt_latest - service[c] - dist[c, nxt]
            latest = twe[c] if twe[c] < bound else bound
        lstart[t, k] = latest
        nxt_latest = latest
        nxt = c


@njit(cache=True)
def row_cost(nodes, length, t, dist):
    if length == 0:
        return 0.0
    total = 0.0
    prev = 0
    for k in range(length):
        c = nodes[t, k]
        total += dist[prev, c]
        prev = c
    total += dist[prev, 0]
    return total


@njit(cache=True)
def remove_ids(
    nodes,
    lens,
    tdem,
    tcost,
    estart,
    lstart,
    tour_of,
    unassigned,
    n_tours,
    ids,
    dist,
    demand,
    service,
    tws,
    twe,
    has_tw,
):
    """Detach customers from their tours; empty tours are swap-deleted.

    Returns (new tour count, travel-cost delta, sum of detached prizes is
    handled by the caller). ids must be deduplicated and currently assigned.
    """
    cost_delta = 0.0
    nt = n_tours
    for i in range(ids.shape[0]):
        c = ids[i]
        t = tour_of[c]
        if t < 0:
            continue
        L = lens[t]
        p = -1
        for k in range(L):
            if nodes[t, k] == c:
                p = k
                break
        if p < 0:
            continue
        prev = nodes[t, p - 1] if p > 0 else 0
        nxt = nodes[t, p + 1] if p < L - 1 else 0
        delta = dist[prev, nxt] - dist[prev, c] - dist[c, nxt]
        tcost[t] += delta
        cost_delta += delta
        for k in range(p, L - 1):
            nodes[t, k] = nodes[t, k + 1]
        lens[t] = L - 1
        tdem[t] -= demand[c]
        tour_of[c] = -1
        unassigned[c] = True
        if lens[t] == 0:
            last = nt - 1
            if t != last:
                Ll = lens[last]
                for k in range(Ll):
                    moved = nodes[last, k]
                    nodes[t, k] = moved
                    tour_of[moved] = t
                lens[t] = Ll
                tdem[t] = tdem[last]
                tcost[t] = tcost[last]
                if has_tw:
                    for k in range(Ll):
                        estart[t, k] = estart[last, k]
                        lstart[t, k] = lstart[last, k]
            lens[last] = 0
            tdem[last] = 0
            tcost[last] = 0.0
            nt = last
        elif has_tw:
            retime_forward(nodes, lens, estart, t, dist, service, tws)
            retime_backward(nodes, lens, lstart, t, dist, service, twe)
    return nt, cost_delta


@njit(cache=True)
def greedy_insert(
    nodes,
    lens,
    tdem,
    tcost,
    estart,
    lstart,
    tour_of,
    unassigned,
    n_tours,
    order,
    dist,
    demand,
    capacity,
    service,
    tws,
    twe,
    prize,
    problem,
    commits,
):
    """Insert customers one by one at their cheapest feasible position.

    Scan order is fixed: existing tours ascending, positions ascending,
    then the open-new-tour option; only a strictly smaller delta wins, so
    ties resolve to the lexicographically first (tour, position). For
    PCVRP a customer is committed only when its prize-adjusted delta is
    strictly negative. ``commits[i]`` receives the chosen (tour, position)
    or (-1, -1).

    Returns (new tour count, travel-cost delta, recouped prize total).
    """
    nt = n_tours
    cost_delta = 0.0
    prize_delta = 0.0
    width = nodes.shape[1]
    has_tw = problem == 1
    pcvrp = problem == 2
    for oi in range(order.shape[0]):
        c = order[oi]
        commits[oi, 0] = -1
        commits[oi, 1] = -1
        if not unassigned[c]:
            continue
        dc = demand[c]
        prz = prize[c]
        best = np.inf
        best_t = -1
        best_p = -1
        for t in range(nt):
            if tdem[t] + dc > capacity or lens[t] >= width:
                continue
            L = lens[t]
            if has_tw:
                depart_prev = 0.0
                prevnode = 0
                for p in range(L + 1):
                    nxt = nodes[t, p] if p < L else 0
                    arrive = depart_prev + dist[prevnode, c]
                    start = arrive if arrive > tws[c] else tws[c]
                    ok = start <= twe[c]
                    if ok and p < L:
                        if start + service[c] + dist[c, nxt] > lstart[t, p]:
                            ok = False
                    if ok:
                        cand = dist[prevnode, c] + dist[c, nxt] - dist[prevnode, nxt] - prz
                        if cand < best:
                            best = cand
                            best_t = t
                            best_p = p
                    if p < L:
                        depart_prev = estart[t, p] + service[nxt]
                        prevnode = nxt
            else:
                prevnode = 0
                for p in range(L + 1):
                    nxt = nodes[t, p] if p < L else 0
                    cand = dist[prevnode, c] + dist[c, nxt] - dist[prevnode, nxt] - prz
                    if cand < best:
                        best = cand
                        best_t = t
                        best_p = p
                    prevnode = nxt
        new_ok = nt < nodes.shape[0]
        if new_ok and has_tw:
            arrive = dist[0, c]
            start = arrive if arrive > tws[c] else tws[c]
            new_ok = start <= twe[c]
        if new_ok:
            cand = dist[0, c] + dist[c, 0] - dist[0, 0] - prz
            if cand < best:
                best = cand
                best_t = nt
                best_p = 0
        if best_t < 0:
            continue
        if pcvrp and best >= 0.0:
            continue
        raw = best + prz
        if best_t == nt:
            t = nt
            nodes[t, 0] = c
            lens[t] = 1
            tdem[t] = dc
            tcost[t] = dist[0, c] + dist[c, 0]
            nt += 1
        else:
            t = best_t
            L = lens[t]
            for k in range(L, best_p, -1):
                nodes[t, k] = nodes[t, k - 1]
            nodes[t, best_p] = c
            lens[t] = L + 1
            tdem[t] += dc
            tcost[t] += raw
        tour_of[c] = t
        unassigned[c] = False
        cost_delta += raw
        prize_delta += prz
        if has_tw:
            retime_forward(nodes, lens, estart, t, dist, service, tws)
            retime_backward(nodes, lens, lstart, t, dist, service, twe)
        commits[oi, 0] = t
        commits[oi, 1] = best_p
    return nt, cost_delta, prize_delta
