"""Raster, labeling, probability and scribble containers.

All containers hold numpy arrays laid out row-major as ``(height, width, ...)``
and are frozen after construction: arrays are copied and marked read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .errors import InvalidArgument, NumericError, UnsupportedInput

UNLABELED = -1
ROW_SUM_TOL = 1e-6

NEIGHBORHOODS = ("grid4", "grid8", "dense")


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GridImage:
    """Per-pixel intensities in [0, 1], shape ``(height, width, channels)``."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise InvalidArgument(f"image must be (H, W, 1|3), got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidArgument("image must have at least one pixel")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise InvalidArgument("image values must be finite and in [0, 1]")
        object.__setattr__(self, "data", _frozen(data, np.float64))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def num_pixels(self) -> int:
        return self.height * self.width

    def flat(self) -> np.ndarray:
        """Intensities as a ``(num_pixels, channels)`` array in raster order."""
        return self.data.reshape(-1, self.channels)


@dataclass(frozen=True)
class Labeling:
    labels: np.ndarray
    num_labels: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise InvalidArgument(f"labels must be 2D, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise InvalidArgument("labels must be integers")
        if self.num_labels < 1:
            raise InvalidArgument("num_labels must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_labels):
            raise InvalidArgument(f"labels must lie in [0, {self.num_labels})")
        object.__setattr__(self, "labels", _frozen(labels, np.int64))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def num_pixels(self) -> int:
        return self.labels.size

    def flat(self) -> np.ndarray:
        return self.labels.reshape(-1)

    @classmethod
    def from_flat(cls, flat, height, width, num_labels) -> "Labeling":
        return cls(np.asarray(flat).reshape(height, width), num_labels)


@dataclass(frozen=True)
class SoftSegmentation:
    """Per-pixel K-way distributions, shape ``(height, width, K)``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 3 or probs.shape[2] < 1:
            raise InvalidArgument(f"probs must be (H, W, K), got shape {probs.shape}")
        if not np.all(np.isfinite(probs)):
            raise NumericError("probabilities must be finite")
        if probs.min() < 0.0 or probs.max() > 1.0:
            raise InvalidArgument("probabilities must lie in [0, 1]")
        if np.max(np.abs(probs.sum(axis=2) - 1.0)) > ROW_SUM_TOL:
            raise InvalidArgument("probability rows must sum to 1")
        object.__setattr__(self, "probs", _frozen(probs, np.float64))

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    @property
    def num_labels(self) -> int:
        return self.probs.shape[2]

    @property
    def num_pixels(self) -> int:
        return self.height * self.width

    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1, self.num_labels)

    def argmax(self) -> Labeling:
        return Labeling(np.argmax(self.probs, axis=2), self.num_labels)

    @classmethod
    def from_labeling(cls, labeling: Labeling) -> "SoftSegmentation":
        eye = np.eye(labeling.num_labels)
        return cls(eye[labeling.labels])


@dataclass(frozen=True)
class Chain:
    """One scribble stroke: a label and its ordered ``(x, y)`` pixels."""

    label: int
    points: tuple

    def __post_init__(self):
        pts = tuple((int(x), int(y)) for x, y in self.points)
        if not pts:
            raise InvalidArgument("a chain needs at least one pixel")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "label", int(self.label))

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class ScribbleMask:
    """Partial ground truth: ``labels`` holds a class index or ``UNLABELED``."""

    labels: np.ndarray
    num_labels: int
    chains: Optional[tuple] = field(default=None)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise InvalidArgument("scribble raster must be 2D")
        bad = (labels != UNLABELED) & ((labels < 0) | (labels >= self.num_labels))
        if np.any(bad):
            raise InvalidArgument(f"scribble labels must be UNLABELED or in [0, {self.num_labels})")
        object.__setattr__(self, "labels", _frozen(labels, np.int64))
        if self.chains is not None:
            chains = tuple(self.chains)
            h, w = labels.shape
            for ch in chains:
                if not 0 <= ch.label < self.num_labels:
                    raise InvalidArgument(f"chain label {ch.label} out of range")
                for x, y in ch.points:
                    if not (0 <= x < w and 0 <= y < h):
                        raise InvalidArgument(f"chain pixel ({x}, {y}) outside the raster")
            object.__setattr__(self, "chains", chains)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @cached_property
    def labeled(self) -> np.ndarray:
        """Boolean raster of the labeled set."""
        out = self.labels != UNLABELED
        out.setflags(write=False)
        return out

    @property
    def num_labeled(self) -> int:
        return int(self.labeled.sum())

    @classmethod
    def from_chains(cls, height, width, num_labels, chains: Sequence[Chain]) -> "ScribbleMask":
        raster = np.full((height, width), UNLABELED, dtype=np.int64)
        for ch in chains:
            for x, y in ch.points:
                raster[y, x] = ch.label
        return cls(raster, num_labels, tuple(chains))


@dataclass(frozen=True)
class PairwiseGraph:
    """Undirected weighted neighbor structure over raster-ordered pixels.

    ``edges`` is ``(M, 2)`` with ``p < q`` in each row; ``weights`` is ``(M,)``.
    """

    num_pixels: int
    edges: np.ndarray
    weights: np.ndarray
    neighborhood: str = "grid4"
    radius: Optional[float] = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.neighborhood not in NEIGHBORHOODS:
            raise InvalidArgument(f"unknown neighborhood {self.neighborhood!r}")
        if edges.shape[0] != weights.shape[0]:
            raise InvalidArgument("edges and weights differ in length")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidArgument("edge weights must be finite and nonnegative")
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.num_pixels:
                raise InvalidArgument("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise InvalidArgument("self-edges are not allowed")
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            keys = lo * self.num_pixels + hi
            if np.unique(keys).size != keys.size:
                raise InvalidArgument("duplicate unordered pair in edge list")
            edges = np.stack([lo, hi], axis=1)
        object.__setattr__(self, "edges", _frozen(edges, np.int64))
        object.__setattr__(self, "weights", _frozen(weights, np.float64))

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def adjacency(self):
        """CSR adjacency ``(indptr, neighbors, weights)`` with both directions."""
        n = self.num_pixels
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        w = np.concatenate([self.weights, self.weights])
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        for arr in (indptr, dst, w):
            arr.setflags(write=False)
        return indptr, dst, w

    @cached_property
    def matrix(self):
        """Symmetric sparse weight matrix and the weighted degree vector."""
        indptr, nbrs, w = self.adjacency
        n = self.num_pixels
        mat = sparse.csr_matrix((w, nbrs, indptr), shape=(n, n))
        return mat, np.asarray(mat.sum(axis=1)).reshape(-1)

    def scaled(self, factor: float) -> "PairwiseGraph":
        return PairwiseGraph(self.num_pixels, self.edges, self.weights * factor,
                             self.neighborhood, self.radius)


def one_hot(label: int, num_labels: int) -> np.ndarray:
    if not 0 <= label < num_labels:
        raise InvalidArgument(f"label {label} out of range for K={num_labels}")
    out = np.zeros(num_labels)
    out[label] = 1.0
    return out


def softmax(scores, axis=-1) -> np.ndarray:
    """Numerically stable softmax along ``axis``."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise NumericError("softmax input must be finite")
    z = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def shorten_chain(n: int, keep_ratio: float) -> tuple[int, int]:
    """Return ``(start, count)`` of the centered sub-chain to keep."""
    k = max(1, math.ceil(keep_ratio * n))
    k = min(k, n)
    return (n - k) // 2, k


def shorten_scribbles(mask: ScribbleMask, keep_ratio: float) -> ScribbleMask:
    """Trim every stroke symmetrically from both ends.

    A stroke of ``n`` pixels keeps ``max(1, ceil(keep_ratio * n))`` centered
    pixels; at ratio 0 each stroke degenerates to a single click.
    """
    if mask.chains is None:
        raise UnsupportedInput("shortening needs ordered stroke chains")
    if not 0.0 <= keep_ratio <= 1.0:
        raise InvalidArgument("keep_ratio must lie in [0, 1]")
    kept = []
    for ch in mask.chains:
        start, k = shorten_chain(len(ch), keep_ratio)
        kept.append(Chain(ch.label, ch.points[start:start + k]))
    return ScribbleMask.from_chains(mask.height, mask.width, mask.num_labels, kept)
