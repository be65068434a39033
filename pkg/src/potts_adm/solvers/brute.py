from __future__ import annotations

import numpy as np

from ..errors import ResourceLimit
from .problem import DiscreteProblem, make_report

MAX_LABELINGS = 2 ** 24
CHUNK = 1 << 15


def _digits(start, stop, n, k):
    """Base-``k`` digits of indices ``start..stop-1``; pixel 0 is most significant."""
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((idx.size, n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        out[:, pos] = idx % k
        idx //= k
    return out


def brute_force(problem: DiscreteProblem):
    """Exhaustive minimization.

    Enumeration runs in lexicographic order of the flat labeling and keeps the
    first minimum, so ties resolve to the lexicographically smallest labeling.
    """
    n, k = problem.num_pixels, problem.num_labels
    total = k ** n
    if total > MAX_LABELINGS:
        raise ResourceLimit(f"{k}^{n} labelings exceed the enumeration guard")
    costs = problem.unary.costs
    e = problem.graph.edges
    w = problem.graph.weights
    best_e, best_i = np.inf, -1
    for start in range(0, total, CHUNK):
        stop = min(total, start + CHUNK)
        labs = _digits(start, stop, n, k)
        energy = costs[np.arange(n), labs].sum(axis=1)
        if w.size:
            energy = energy + (labs[:, e[:, 0]] != labs[:, e[:, 1]]) @ w
        i = int(np.argmin(energy))
        if energy[i] < best_e:
            best_e, best_i = float(energy[i]), start + i
    labels = _digits(best_i, best_i + 1, n, k)[0]
    return make_report(problem, labels, [problem.energy(labels)], 1, True)
