"""Exact, regularization-free reference solver and combinatorial checks.

The exact solver maximizes the transported mass first (a max-flow on the
bipartite graph of unblocked couplings) and then minimizes the transport
cost at that mass (a min-cost flow).  Weights and capacities are scaled to
integers so the flow computation is exact for the scaled instance; callers
should compare against it with ~1e-6 slack.  This module is a test device:
it is exact but makes no attempt to be fast beyond desk scale (n <= ~200).
"""

from enum import Enum

import networkx as nx
import numpy as np

from .core import TransportPlan, as_cost, as_weights

__all__ = [
    "CumsumOrder",
    "solve_sot_exact",
    "northwest_corner",
    "cumsum_compare",
    "complete_transport_feasible",
]

# Capacity/cost quantum: masses and costs are rounded half-even to integer
# multiples of 1/SCALE before the flow computation.
SCALE = 10**9


def _scaled(values):
    return [round(val * SCALE) for val in np.asarray(values, dtype=float)]


def _build_graph(a_int, b_int, C):
    G = nx.DiGraph()
    G.add_node("s")
    G.add_node("t")
    n, m = C.shape
    for i in range(n):
        G.add_edge("s", ("r", i), capacity=a_int[i], weight=0)
    for j in range(m):
        G.add_edge(("c", j), "t", capacity=b_int[j], weight=0)
    finite = ~C.blocked
    for i, j in zip(*np.nonzero(finite)):
        G.add_edge(
            ("r", int(i)),
            ("c", int(j)),
            capacity=min(a_int[i], b_int[j]),
            weight=round(C.entries[i, j] * SCALE),
        )
    return G


def solve_sot_exact(a, b, C):
    """Maximal transported mass, an optimal plan at that mass, and its cost.

    Returns ``(theta_bar, plan, cost)`` where ``theta_bar`` is the maximum
    mass that can cross the unblocked couplings, ``plan`` is a minimum-cost
    plan transporting exactly ``theta_bar``, and ``cost`` is <plan, C> over
    the finite entries.  ``theta_bar = 0`` (everything blocked) is a valid
    output, not an error.
    """
    a = as_weights(a)
    b = as_weights(b)
    C = as_cost(C)
    n, m = C.shape
    if a.shape[0] != n or b.shape[0] != m:
        raise ValueError("marginal lengths do not match cost shape")

    a_int = _scaled(a)
    b_int = _scaled(b)
    G = _build_graph(a_int, b_int, C)
    flow_dict = nx.max_flow_min_cost(G, "s", "t")

    plan = np.zeros((n, m))
    for i in range(n):
        for node, val in flow_dict.get(("r", i), {}).items():
            if val:
                plan[i, node[1]] = val / SCALE
    theta_bar = float(plan.sum())
    finite = ~C.blocked
    cost = float(np.sum(plan[finite] * C.entries[finite]))
    return theta_bar, TransportPlan(plan), cost


def northwest_corner(a, b) -> TransportPlan:
    """Greedy plan filling (i, j) with the min of remaining budgets.

    Requires equal total masses (within 1e-12); produces row sums a and
    column sums b up to floating-point rounding.
    """
    a = as_weights(a)
    b = as_weights(b)
    if abs(a.sum() - b.sum()) > 1e-12:
        raise ValueError(
            f"total masses differ: {a.sum():.15g} vs {b.sum():.15g}"
        )
    rem_a = a.copy()
    rem_b = b.copy()
    plan = np.zeros((a.shape[0], b.shape[0]))
    i, j = 0, 0
    while i < a.shape[0] and j < b.shape[0]:
        move = min(rem_a[i], rem_b[j])
        plan[i, j] = move
        rem_a[i] -= move
        rem_b[j] -= move
        # the min-subtraction zeroes at least one remainder exactly
        if rem_a[i] <= 0:
            i += 1
        if rem_b[j] <= 0:
            j += 1
    return TransportPlan(plan)


class CumsumOrder(Enum):
    STRICTLY_LESS = "strictly_less"
    LESS_OR_EQUAL = "less_or_equal"
    EQUAL = "equal"
    NOT_COMPARABLE = "not_comparable"


def cumsum_compare(u, v) -> CumsumOrder:
    """Compare two vectors in the cumulative (prefix-sum) order.

    ``LESS_OR_EQUAL``: every proper prefix sum of u is <= that of v and the
    totals agree.  ``STRICTLY_LESS`` additionally requires at least one
    strict prefix inequality.  ``EQUAL`` means u == v elementwise.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    if np.array_equal(u, v):
        return CumsumOrder.EQUAL
    cu = np.cumsum(u)
    cv = np.cumsum(v)
    if cu[-1] != cv[-1]:
        return CumsumOrder.NOT_COMPARABLE
    prefix_u, prefix_v = cu[:-1], cv[:-1]
    if np.all(prefix_u <= prefix_v):
        if np.any(prefix_u < prefix_v):
            return CumsumOrder.STRICTLY_LESS
        return CumsumOrder.LESS_OR_EQUAL
    return CumsumOrder.NOT_COMPARABLE


def complete_transport_feasible(a, b, C) -> bool:
    """True iff all of a can be moved onto all of b across unblocked arcs.

    Equivalently: the masses agree and the max flow saturates them.
    """
    a = as_weights(a)
    b = as_weights(b)
    C = as_cost(C)
    a_int = _scaled(a)
    b_int = _scaled(b)
    if sum(a_int) != sum(b_int):
        return False
    G = _build_graph(a_int, b_int, C)
    flow_value, _ = nx.maximum_flow(G, "s", "t")
    return flow_value == sum(a_int)
