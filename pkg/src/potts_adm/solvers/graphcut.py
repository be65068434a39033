"""Exact binary min-cut and alpha-expansion for Potts energies.

Binary labels map to cut sides: ``x = 0`` is the source side and ``x = 1`` the
sink side, so the arc ``s -> p`` is paid when ``x_p = 1`` and ``p -> t`` when
``x_p = 0``. The flow kernel is Dinic's algorithm on float capacities.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import InvalidArgument
from .problem import DiscreteProblem, make_report

ACCEPT_RTOL = 1e-12


@njit(cache=True)
def _dinic(n_nodes, tails, heads, cap_fwd, cap_rev, s, t):
    m = tails.size
    to = np.empty(2 * m, np.int64)
    res = np.empty(2 * m, np.float64)
    first = np.zeros(n_nodes + 1, np.int64)
    for i in range(m):
        to[2 * i] = heads[i]
        res[2 * i] = cap_fwd[i]
        to[2 * i + 1] = tails[i]
        res[2 * i + 1] = cap_rev[i]
        first[tails[i] + 1] += 1
        first[heads[i] + 1] += 1
    for v in range(n_nodes):
        first[v + 1] += first[v]
    arcs = np.empty(2 * m, np.int64)
    fill = first[:-1].copy()
    for i in range(m):
        arcs[fill[tails[i]]] = 2 * i
        fill[tails[i]] += 1
        arcs[fill[heads[i]]] = 2 * i + 1
        fill[heads[i]] += 1

    level = np.empty(n_nodes, np.int64)
    queue = np.empty(n_nodes, np.int64)
    ptr = np.empty(n_nodes, np.int64)
    path = np.empty(n_nodes, np.int64)
    flow = 0.0
    while True:
        level[:] = -1
        level[s] = 0
        qh, qt = 0, 1
        queue[0] = s
        while qh < qt:
            u = queue[qh]
            qh += 1
            for j in range(first[u], first[u + 1]):
                a = arcs[j]
                v = to[a]
                if res[a] > 0.0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
        if level[t] < 0:
            break
        for v in range(n_nodes):
            ptr[v] = first[v]
        depth = 0
        u = s
        while True:
            if u == t:
                f = np.inf
                for i in range(depth):
                    if res[path[i]] < f:
                        f = res[path[i]]
                for i in range(depth):
                    a = path[i]
                    res[a] -= f
                    res[a ^ 1] += f
                flow += f
                k = 0
                while k < depth and res[path[k]] > 0.0:
                    k += 1
                depth = k
                u = s if k == 0 else to[path[k - 1]]
                continue
            advanced = False
            while ptr[u] < first[u + 1]:
                a = arcs[ptr[u]]
                v = to[a]
                if res[a] > 0.0 and level[v] == level[u] + 1:
                    path[depth] = a
                    depth += 1
                    u = v
                    advanced = True
                    break
                ptr[u] += 1
            if not advanced:
                if u == s:
                    break
                level[u] = -1
                depth -= 1
                u = to[path[depth] ^ 1]
                ptr[u] += 1

    # source side = nodes reachable in the residual graph
    side = np.zeros(n_nodes, np.uint8)
    side[s] = 1
    qh, qt = 0, 1
    queue[0] = s
    while qh < qt:
        u = queue[qh]
        qh += 1
        for j in range(first[u], first[u + 1]):
            a = arcs[j]
            v = to[a]
            if res[a] > 0.0 and side[v] == 0:
                side[v] = 1
                queue[qt] = v
                qt += 1
    return flow, side


def max_flow(num_nodes, tails, heads, cap_fwd, cap_rev, source, sink):
    """Max-flow value and a min-cut source-side indicator for a directed graph.

    Each row ``i`` adds arc ``tails[i] -> heads[i]`` with ``cap_fwd[i]`` and the
    opposite arc with ``cap_rev[i]``.
    """
    tails = np.ascontiguousarray(tails, dtype=np.int64)
    heads = np.ascontiguousarray(heads, dtype=np.int64)
    cap_fwd = np.ascontiguousarray(cap_fwd, dtype=np.float64)
    cap_rev = np.ascontiguousarray(cap_rev, dtype=np.float64)
    if np.any(cap_fwd < 0) or np.any(cap_rev < 0):
        raise InvalidArgument("capacities must be nonnegative")
    flow, side = _dinic(int(num_nodes), tails, heads, cap_fwd, cap_rev,
                        int(source), int(sink))
    return flow, side.astype(bool)


def solve_binary_submodular(u0, u1, edges, e00, e01, e10, e11):
    """Globally minimize a binary pairwise energy with submodular terms.

    ``u0``/``u1`` are per-node costs of ``x = 0``/``x = 1``; edge ``i`` joining
    ``(p, q)`` costs ``e{x_p}{x_q}[i]``. Returns ``x`` as an int8 array.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    u1 = np.asarray(u1, dtype=np.float64)
    n = u0.size
    p = edges[:, 0]
    q = edges[:, 1]
    slack = 0.5 * (e01 + e10 - e00 - e11)
    if np.any(slack < -1e-9 * (1.0 + np.abs(e01) + np.abs(e10))):
        raise InvalidArgument("pairwise terms are not submodular")
    slack = np.maximum(slack, 0.0)
    # split the non-pairwise part symmetrically between the two endpoints
    a = 0.5 * (e10 - e00 + e11 - e01)
    lin = u1 - u0
    lin = lin + np.bincount(p, weights=a, minlength=n)
    lin = lin + np.bincount(q, weights=e11 - e00 - a, minlength=n)

    s, t = n, n + 1
    nodes = np.arange(n)
    src = lin > 0
    snk = lin < 0
    tails = np.concatenate([p, np.full(src.sum(), s), nodes[snk]])
    heads = np.concatenate([q, nodes[src], np.full(snk.sum(), t)])
    fwd = np.concatenate([slack, lin[src], -lin[snk]])
    rev = np.concatenate([slack, np.zeros(src.sum() + snk.sum())])
    keep = (fwd > 0) | (rev > 0)
    _, source_side = max_flow(n + 2, tails[keep], heads[keep], fwd[keep], rev[keep], s, t)
    return (~source_side[:n]).astype(np.int8)


def maxflow_binary(problem: DiscreteProblem):
    """Exact minimizer of a two-label unary + Potts energy."""
    if problem.num_labels != 2:
        raise InvalidArgument("maxflow_binary needs exactly two labels")
    w = problem.graph.weights
    zero = np.zeros_like(w)
    x = solve_binary_submodular(problem.unary.costs[:, 0], problem.unary.costs[:, 1],
                                problem.graph.edges, zero, w, w, zero)
    labels = x.astype(np.int64)
    return make_report(problem, labels, [problem.energy(labels)], 1, True)


def expansion_move(problem: DiscreteProblem, labels: np.ndarray, alpha: int) -> np.ndarray:
    """Best labeling reachable from ``labels`` by switching any pixels to ``alpha``."""
    n = labels.size
    costs = problem.unary.costs
    u0 = costs[np.arange(n), labels]
    u1 = costs[:, alpha]
    e = problem.graph.edges
    w = problem.graph.weights
    lp = labels[e[:, 0]]
    lq = labels[e[:, 1]]
    e00 = w * (lp != lq)
    e01 = w * (lp != alpha)
    e10 = w * (lq != alpha)
    e11 = np.zeros_like(w)
    x = solve_binary_submodular(u0, u1, e, e00, e01, e10, e11)
    return np.where(x == 1, alpha, labels)


def alpha_expansion(problem: DiscreteProblem, init=None, max_sweeps: int = 5):
    """Alpha-expansion with labels visited in increasing order.

    A move is kept only if it lowers the energy, so the trace (initial energy
    followed by one entry per sweep) never increases.
    """
    if max_sweeps < 1:
        raise InvalidArgument("max_sweeps must be >= 1")
    if init is None:
        labels = np.argmin(problem.unary.costs, axis=1).astype(np.int64)
    else:
        labels = problem.check_init(init)
    energy = problem.energy(labels)
    trace = [energy]
    converged = False
    sweeps = 0
    for _ in range(max_sweeps):
        changed = False
        for alpha in range(problem.num_labels):
            proposal = expansion_move(problem, labels, alpha)
            if np.array_equal(proposal, labels):
                continue
            new_energy = problem.energy(proposal)
            if new_energy < energy - ACCEPT_RTOL * max(1.0, abs(energy)):
                labels, energy = proposal, new_energy
                changed = True
        sweeps += 1
        trace.append(energy)
        if not changed:
            converged = True
            break
    return make_report(problem, labels, trace, sweeps, converged)
