"""Local baselines: iterated conditional modes and sequential mean-field."""

from __future__ import annotations

import numpy as np
from numba import njit

from ..core_types import SoftSegmentation
from ..errors import InvalidArgument
from .problem import DiscreteProblem, make_report

ICM_RTOL = 1e-12


@njit(cache=True)
def _icm_sweep(labels, costs, indptr, nbrs, wts):
    n, k = costs.shape
    changed = 0
    local = np.empty(k)
    for p in range(n):
        for c in range(k):
            local[c] = costs[p, c]
        for j in range(indptr[p], indptr[p + 1]):
            lq = labels[nbrs[j]]
            for c in range(k):
                if c != lq:
                    local[c] += wts[j]
        cur = labels[p]
        best = cur
        best_val = local[cur]
        tol = 1e-12 * max(1.0, abs(best_val))
        for c in range(k):
            if local[c] < best_val - tol:
                best_val = local[c]
                best = c
        if best != cur:
            labels[p] = best
            changed += 1
    return changed


def icm(problem: DiscreteProblem, init=None, max_sweeps: int = 50):
    """Raster-order coordinate descent; a pixel moves only on strict improvement."""
    if max_sweeps < 1:
        raise InvalidArgument("max_sweeps must be >= 1")
    if init is None:
        labels = np.argmin(problem.unary.costs, axis=1).astype(np.int64)
    else:
        labels = problem.check_init(init)
    indptr, nbrs, wts = problem.graph.adjacency
    costs = np.ascontiguousarray(problem.unary.costs)
    trace = [problem.energy(labels)]
    converged = False
    sweeps = 0
    for _ in range(max_sweeps):
        changed = _icm_sweep(labels, costs, indptr, nbrs, wts)
        sweeps += 1
        trace.append(problem.energy(labels))
        if changed == 0:
            converged = True
            break
    return make_report(problem, labels, trace, sweeps, converged)


@njit(cache=True)
def _mf_sweep(q, costs, indptr, nbrs, wts, damping):
    n, k = costs.shape
    logits = np.empty(k)
    for p in range(n):
        for c in range(k):
            logits[c] = -costs[p, c]
        for j in range(indptr[p], indptr[p + 1]):
            r = nbrs[j]
            for c in range(k):
                logits[c] -= wts[j] * (1.0 - q[r, c])
        m = logits.max()
        total = 0.0
        for c in range(k):
            logits[c] = np.exp(logits[c] - m)
            total += logits[c]
        for c in range(k):
            q[p, c] = damping * q[p, c] + (1.0 - damping) * logits[c] / total


def mean_field_free_energy(problem: DiscreteProblem, q: np.ndarray) -> float:
    """Naive mean-field free energy: expected energy minus entropy."""
    q = np.asarray(q, dtype=np.float64).reshape(problem.num_pixels, problem.num_labels)
    e = problem.graph.edges
    expected_unary = float(np.sum(q * problem.unary.costs))
    agree = np.sum(q[e[:, 0]] * q[e[:, 1]], axis=1)
    expected_pair = float(np.dot(problem.graph.weights, 1.0 - agree))
    with np.errstate(divide="ignore", invalid="ignore"):
        neg_entropy = float(np.sum(np.where(q > 0, q * np.log(q), 0.0)))
    return expected_unary + expected_pair + neg_entropy


def mean_field_dense(problem: DiscreteProblem, init: SoftSegmentation | None = None,
                     max_sweeps: int = 10, damping: float = 0.0):
    """Sequential naive mean-field for Potts.

    Each pixel in raster order is set to
    ``Q_p(k) ~ exp(-U(p,k) - sum_q w_pq (1 - Q_q(k)))``, mixed with its old value
    by ``damping``. Returns the marginals and the free energy after each sweep
    (first entry is the initial value).
    """
    if not 0.0 <= damping < 1.0:
        raise InvalidArgument("damping must lie in [0, 1)")
    if max_sweeps < 0:
        raise InvalidArgument("max_sweeps must be >= 0")
    n, k = problem.num_pixels, problem.num_labels
    if init is None:
        q = np.full((n, k), 1.0 / k)
    else:
        q = np.array(init.probs if isinstance(init, SoftSegmentation) else init,
                     dtype=np.float64).reshape(n, k)
    indptr, nbrs, wts = problem.graph.adjacency
    costs = np.ascontiguousarray(problem.unary.costs)
    trace = [mean_field_free_energy(problem, q)]
    for _ in range(max_sweeps):
        _mf_sweep(q, costs, indptr, nbrs, wts, float(damping))
        trace.append(mean_field_free_energy(problem, q))
    q = q / q.sum(axis=1, keepdims=True)
    return SoftSegmentation(q.reshape(problem.height, problem.width, k)), trace


def decode(problem: DiscreteProblem, seg: SoftSegmentation):
    """Argmax labeling of mean-field marginals as a solve report."""
    labels = np.argmax(seg.flat(), axis=1)
    return make_report(problem, labels, [problem.energy(labels)], 1, True)
