"""Segmentation quality: per-class IoU, pixel accuracy, boundary-band accuracy."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .core_types import Labeling
from .errors import InvalidArgument

TRIMAP_RADII = (8, 16)


def _arrays(pred, gt):
    p = pred.labels if isinstance(pred, Labeling) else np.asarray(pred)
    g = gt.labels if isinstance(gt, Labeling) else np.asarray(gt)
    if p.ndim == 1:
        p = p[None, :]
    if g.ndim == 1:
        g = g[None, :]
    if p.shape != g.shape:
        raise InvalidArgument(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    return p, g


def miou(pred, gt, num_labels: Optional[int] = None):
    """Per-class IoU (NaN for classes in neither map) and the mean over gt classes."""
    p, g = _arrays(pred, gt)
    if num_labels is None:
        num_labels = int(max(p.max(), g.max())) + 1
    ious = np.full(num_labels, np.nan)
    exact = {}
    for c in range(num_labels):
        inter = int(np.sum((p == c) & (g == c)))
        union = int(np.sum((p == c) | (g == c)))
        if union:
            exact[c] = Fraction(inter, union)
            ious[c] = float(exact[c])
    present = np.unique(g).tolist()
    # rational mean so that hand-countable cases round exactly once
    return ious, float(sum(exact[c] for c in present) / len(present))


def pixel_accuracy(pred, gt) -> float:
    p, g = _arrays(pred, gt)
    return float(np.mean(p == g))


def boundary_pixels(gt) -> np.ndarray:
    """Pixels with a 4-neighbor of a different ground-truth label."""
    g = gt.labels if isinstance(gt, Labeling) else np.asarray(gt)
    if g.ndim == 1:
        g = g[None, :]
    b = np.zeros(g.shape, dtype=bool)
    dh = g[:, 1:] != g[:, :-1]
    b[:, 1:] |= dh
    b[:, :-1] |= dh
    dv = g[1:, :] != g[:-1, :]
    b[1:, :] |= dv
    b[:-1, :] |= dv
    return b


def boundary_distance(gt) -> np.ndarray:
    """8-connected BFS distance to the nearest boundary pixel (-1 if none)."""
    b = boundary_pixels(gt)
    h, w = b.shape
    dist = np.full((h, w), -1, dtype=np.int64)
    queue = deque()
    for y, x in zip(*np.nonzero(b)):
        dist[y, x] = 0
        queue.append((y, x))
    while queue:
        y, x = queue.popleft()
        d = dist[y, x] + 1
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and dist[ny, nx] < 0:
                    dist[ny, nx] = d
                    queue.append((ny, nx))
    return dist


def trimap_band(gt, radius: int) -> np.ndarray:
    """Pixels within ``radius`` of a boundary.

    Boundary pixels sit half a pixel from the label discontinuity, so the band
    keeps BFS distances strictly below ``radius``.
    """
    if radius < 1:
        raise InvalidArgument("radius must be >= 1")
    dist = boundary_distance(gt)
    return (dist >= 0) & (dist < radius)


def trimap_accuracy(pred, gt, radius: int) -> Optional[float]:
    """Accuracy restricted to the boundary band; None when the band is empty."""
    p, g = _arrays(pred, gt)
    band = trimap_band(g, radius)
    if not band.any():
        return None
    return float(np.mean(p[band] == g[band]))


@dataclass
class EvalReport:
    per_class_iou: list
    miou: float
    pixel_accuracy: float
    trimap_accuracy: dict
    trimap_pixels: dict
    num_pixels: int

    def to_json(self) -> str:
        d = asdict(self)
        d["per_class_iou"] = [None if np.isnan(v) else v for v in self.per_class_iou]
        return json.dumps(d, sort_keys=True)


def evaluate(pred, gt, num_labels: Optional[int] = None, radii=TRIMAP_RADII) -> EvalReport:
    ious, mean = miou(pred, gt, num_labels)
    p, g = _arrays(pred, gt)
    return EvalReport(
        per_class_iou=[float(v) for v in ious],
        miou=mean,
        pixel_accuracy=pixel_accuracy(p, g),
        trimap_accuracy={str(r): trimap_accuracy(p, g, r) for r in radii},
        trimap_pixels={str(r): int(trimap_band(g, r).sum()) for r in radii},
        num_pixels=int(g.size),
    )
