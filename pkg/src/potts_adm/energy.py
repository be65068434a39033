"""Potts pairwise weights, discrete and relaxed Potts energies, ADM unaries.

Weights already carry the regularizer strength ``lam``; every energy below is
a plain sum over edges of ``w_pq`` times a per-edge disagreement term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_types import (
    GridImage, Labeling, PairwiseGraph, ScribbleMask, SoftSegmentation,
)
from .errors import InvalidArgument, ResourceLimit

SIGMA2_FLOOR = 1e-8
PROB_EPS = 1e-12
# Unary cost used to forbid a label; finite so max-flow arithmetic stays exact.
PROHIBITIVE = 1e9
DEFAULT_MAX_EDGES = 20_000_000


@dataclass(frozen=True)
class EnergyParams:
    lam: float = 1.0
    sigma2: float = 1.0
    delta: float = 8.0
    spatial_radius: float | None = None
    connectivity: str = "grid4"
    max_edges: int = DEFAULT_MAX_EDGES

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidArgument("lam must be nonnegative")
        if not self.sigma2 > 0:
            raise InvalidArgument("sigma2 must be positive")
        if self.connectivity not in ("grid4", "grid8", "dense"):
            raise InvalidArgument(f"unknown connectivity {self.connectivity!r}")
        if self.connectivity == "dense":
            if not self.delta > 0:
                raise InvalidArgument("delta must be positive for dense connectivity")
            if self.radius < 1:
                raise InvalidArgument("spatial_radius must be >= 1 for dense connectivity")

    @property
    def radius(self) -> float:
        """Truncation radius; defaults to three spatial bandwidths."""
        if self.spatial_radius is None:
            return 3.0 * self.delta
        return self.spatial_radius

    def with_sigma2(self, sigma2: float) -> "EnergyParams":
        return EnergyParams(self.lam, sigma2, self.delta, self.spatial_radius,
                            self.connectivity, self.max_edges)


@dataclass(frozen=True)
class UnaryTable:
    """Per-pixel label costs, shape ``(num_pixels, K)``."""

    costs: np.ndarray

    def __post_init__(self):
        costs = np.array(self.costs, dtype=np.float64, copy=True)
        if costs.ndim != 2:
            raise InvalidArgument("unary table must be (num_pixels, K)")
        if not np.all(np.isfinite(costs)):
            raise InvalidArgument("unary costs must be finite (use PROHIBITIVE to forbid)")
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)

    @property
    def num_pixels(self) -> int:
        return self.costs.shape[0]

    @property
    def num_labels(self) -> int:
        return self.costs.shape[1]

    def max_feasible(self) -> float:
        """Largest total unary cost of any labeling avoiding prohibited entries."""
        finite = np.where(self.costs >= PROHIBITIVE, -np.inf, self.costs)
        return float(np.sum(np.maximum(finite.max(axis=1), 0.0)))


def grid_offsets(neighborhood: str):
    """Half-plane ``(dy, dx)`` offsets so each unordered pair appears once."""
    if neighborhood == "grid4":
        return [(0, 1), (1, 0)]
    if neighborhood == "grid8":
        return [(0, 1), (1, 0), (1, 1), (1, -1)]
    raise InvalidArgument(f"not a grid neighborhood: {neighborhood!r}")


def dense_offsets(radius: float):
    r = int(math.floor(radius))
    out = []
    for dy in range(0, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx <= 0:
                continue
            if dy * dy + dx * dx <= radius * radius:
                out.append((dy, dx))
    return out


def _pairs_for_offsets(height, width, offsets):
    """Raster-index pairs ``(p, q)`` for the given offsets, sorted by (p, q)."""
    idx = np.arange(height * width).reshape(height, width)
    ps, qs = [], []
    for dy, dx in offsets:
        y0, y1 = 0, height - dy
        x0, x1 = max(0, -dx), min(width, width - dx)
        if y1 <= y0 or x1 <= x0:
            continue
        ps.append(idx[y0:y1, x0:x1].reshape(-1))
        qs.append(idx[y0 + dy:y1 + dy, x0 + dx:x1 + dx].reshape(-1))
    if not ps:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    p = np.concatenate(ps)
    q = np.concatenate(qs)
    lo, hi = np.minimum(p, q), np.maximum(p, q)
    order = np.lexsort((hi, lo))
    return lo[order], hi[order]


def neighbor_pairs(height, width, neighborhood="grid4", radius=None):
    if neighborhood == "dense":
        if radius is None:
            raise InvalidArgument("dense neighborhoods need a radius")
        return _pairs_for_offsets(height, width, dense_offsets(radius))
    return _pairs_for_offsets(height, width, grid_offsets(neighborhood))


def _sq_diff(image: GridImage, p, q):
    flat = image.flat()
    d = flat[p] - flat[q]
    return np.sum(d * d, axis=1)


def estimate_sigma2(image: GridImage, neighborhood="grid4", radius=None) -> float:
    """Mean squared intensity difference over all neighbor pairs (floored)."""
    p, q = neighbor_pairs(image.height, image.width, neighborhood, radius)
    if p.size == 0:
        raise InvalidArgument("the neighborhood has no pairs on this image")
    return max(float(np.mean(_sq_diff(image, p, q))), SIGMA2_FLOOR)


def build_grid_weights(image: GridImage, params: EnergyParams) -> PairwiseGraph:
    """Contrast-sensitive nearest-neighbor weights ``lam*exp(-d^2 / (2 sigma2))``."""
    if params.connectivity not in ("grid4", "grid8"):
        raise InvalidArgument("build_grid_weights needs grid4 or grid8 connectivity")
    p, q = neighbor_pairs(image.height, image.width, params.connectivity)
    w = params.lam * np.exp(-_sq_diff(image, p, q) / (2.0 * params.sigma2))
    return PairwiseGraph(image.num_pixels, np.stack([p, q], axis=1), w,
                         params.connectivity)


def dense_edge_count(height, width, radius) -> int:
    total = 0
    for dy, dx in dense_offsets(radius):
        total += max(0, height - dy) * max(0, width - abs(dx))
    return total


def build_dense_weights(image: GridImage, params: EnergyParams) -> PairwiseGraph:
    """Truncated Gaussian weights ``lam*exp(-d^2/sigma2)*exp(-|p-q|^2/delta^2)``.

    Note the intensity term divides by ``sigma2``, not ``2*sigma2``.
    """
    if params.connectivity != "dense":
        raise InvalidArgument("build_dense_weights needs dense connectivity")
    radius = params.radius
    count = dense_edge_count(image.height, image.width, radius)
    if count > params.max_edges:
        raise ResourceLimit(f"dense graph would have {count} edges (cap {params.max_edges})")
    p, q = neighbor_pairs(image.height, image.width, "dense", radius)
    dy = p // image.width - q // image.width
    dx = p % image.width - q % image.width
    dist2 = (dy * dy + dx * dx).astype(np.float64)
    w = (params.lam * np.exp(-_sq_diff(image, p, q) / params.sigma2)
         * np.exp(-dist2 / params.delta ** 2))
    return PairwiseGraph(image.num_pixels, np.stack([p, q], axis=1), w, "dense", radius)


def build_weights(image: GridImage, params: EnergyParams) -> PairwiseGraph:
    if params.connectivity == "dense":
        return build_dense_weights(image, params)
    return build_grid_weights(image, params)


def dense_truncation_loss(delta: float, radius: float) -> float:
    """Fraction of the spatial Gaussian mass dropped by truncating at ``radius``."""
    far = int(math.ceil(max(radius, delta * 7.0))) + 1
    ys, xs = np.mgrid[-far:far + 1, -far:far + 1]
    d2 = (ys * ys + xs * xs).astype(np.float64)
    g = np.exp(-d2 / delta ** 2)
    g[far, far] = 0.0
    return float(g[d2 > radius * radius].sum() / g.sum())


def _check_sizes(n, graph: PairwiseGraph):
    if n != graph.num_pixels:
        raise InvalidArgument(f"size mismatch: {n} pixels vs graph over {graph.num_pixels}")


def potts_energy(labeling: Labeling, graph: PairwiseGraph) -> float:
    """Sum of ``w_pq`` over edges whose endpoints carry different labels."""
    labels = labeling.flat() if isinstance(labeling, Labeling) else np.asarray(labeling).reshape(-1)
    _check_sizes(labels.size, graph)
    cut = labels[graph.edges[:, 0]] != labels[graph.edges[:, 1]]
    return float(np.sum(graph.weights[cut]))


def _probs(seg):
    if isinstance(seg, SoftSegmentation):
        return seg.flat()
    arr = np.asarray(seg, dtype=np.float64)
    return arr.reshape(-1, arr.shape[-1])


def relaxed_brackets(seg, graph: PairwiseGraph) -> np.ndarray:
    s = _probs(seg)
    _check_sizes(s.shape[0], graph)
    sp = s[graph.edges[:, 0]]
    sq = s[graph.edges[:, 1]]
    return sp.sum(axis=1) + sq.sum(axis=1) - 2.0 * np.sum(sp * sq, axis=1)


def relaxed_potts_energy(seg, graph: PairwiseGraph) -> float:
    """Quadratic relaxation: per edge ``<1,S_p> + <1,S_q> - 2<S_p,S_q>``."""
    s = _probs(seg)
    _check_sizes(s.shape[0], graph)
    mat, deg = graph.matrix
    return float(np.dot(deg, s.sum(axis=1)) - np.sum(s * (mat @ s)))


def relaxed_potts_gradient(seg, graph: PairwiseGraph) -> np.ndarray:
    """Gradient of the relaxed energy w.r.t. the probabilities, ``(N, K)``."""
    s = _probs(seg)
    _check_sizes(s.shape[0], graph)
    mat, deg = graph.matrix
    return deg[:, None] - 2.0 * (mat @ s)


def adm_unary_from_prediction(seg: SoftSegmentation, mask: ScribbleMask,
                              gamma: float) -> UnaryTable:
    """Latent-labeling unaries: ``-gamma*log S_p^k`` off scribbles, hard on them."""
    if gamma < 0:
        raise InvalidArgument("gamma must be nonnegative")
    if (seg.height, seg.width) != (mask.height, mask.width):
        raise InvalidArgument("segmentation and scribble mask differ in size")
    s = seg.flat()
    costs = -gamma * np.log(np.maximum(s, PROB_EPS))
    labeled = mask.labeled.reshape(-1)
    y = mask.labels.reshape(-1)[labeled]
    hard = np.full((y.size, seg.num_labels), PROHIBITIVE)
    hard[np.arange(y.size), y] = 0.0
    costs[labeled] = hard
    return UnaryTable(costs)
