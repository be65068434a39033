"""Seeded synthetic scenes: 1D staircases and 2D blob images with scribbles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..core_types import Chain, GridImage, Labeling, ScribbleMask
from ..errors import InvalidArgument

SCRIBBLE_MARGIN = 3
MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class SyntheticScene:
    image: GridImage
    gt: Labeling
    scribbles: ScribbleMask
    seed: int
    params: dict = field(default_factory=dict)

    @property
    def num_labels(self) -> int:
        return self.gt.num_labels


def gen_staircase_1d(length, step_positions, step_heights, noise=0.0, seed=0,
                     base=None, scribble_len=5) -> SyntheticScene:
    """Piecewise-constant ``1 x length`` profile split at its largest step.

    ``step_positions[i]`` is the first pixel after step ``i``. Ground truth
    labels pixels left of the dominant step 0 and the rest 1.
    """
    pos = np.asarray(step_positions, dtype=np.int64)
    heights = np.asarray(step_heights, dtype=np.float64)
    if pos.size == 0 or pos.size != heights.size:
        raise InvalidArgument("need matching, nonempty step positions and heights")
    if np.any(np.diff(pos) <= 0) or pos[0] < 1 or pos[-1] > length - 1:
        raise InvalidArgument("step positions must be strictly increasing inside (0, length)")
    x = np.arange(length)
    profile = np.zeros(length)
    for p, h in zip(pos, heights):
        profile[x >= p] += h
    if base is None:
        base = 0.5 - 0.5 * (profile.min() + profile.max())
    rng = np.random.default_rng(seed)
    values = np.clip(base + profile + noise * rng.standard_normal(length), 0.0, 1.0)
    dominant = int(pos[np.argmax(np.abs(heights))])
    gt = (x >= dominant).astype(np.int64)

    chains = []
    for label, (lo, hi) in enumerate([(0, dominant), (dominant, length)]):
        mid = (lo + hi) // 2
        half = max(0, min(scribble_len // 2, (hi - lo) // 2 - 1))
        chains.append(Chain(label, [(i, 0) for i in range(mid - half, mid + half + 1)]))
    scribbles = ScribbleMask.from_chains(1, length, 2, chains)
    params = dict(kind="staircase-1d", length=length, step_positions=pos.tolist(),
                  step_heights=heights.tolist(), noise=noise, dominant=dominant)
    return SyntheticScene(GridImage(values[None, :]), Labeling(gt[None, :], 2),
                          scribbles, seed, params)


def random_staircase(seed, length=96, minor_steps=4, noise=0.02) -> SyntheticScene:
    """A staircase with one dominant step among several weaker ones."""
    if minor_steps < 0 or 4 * minor_steps > length - 17:
        raise InvalidArgument("length too short for the requested steps at spacing 4")
    rng = np.random.default_rng(seed)
    pos = np.sort(rng.choice(np.arange(8, length - 8), size=minor_steps + 1, replace=False))
    while np.any(np.diff(pos) < 4):
        pos = np.sort(rng.choice(np.arange(8, length - 8), size=minor_steps + 1, replace=False))
    heights = rng.uniform(0.06, 0.14, size=minor_steps + 1) * rng.choice([-1.0, 1.0], minor_steps + 1)
    dom = rng.integers(minor_steps + 1)
    heights[dom] = np.sign(heights[dom]) * rng.uniform(0.40, 0.45)
    return gen_staircase_1d(length, pos, heights, noise, seed=int(rng.integers(2 ** 31)))


def _ellipse(h, w, rng):
    cy, cx = rng.uniform(0.25, 0.75) * h, rng.uniform(0.25, 0.75) * w
    ry, rx = rng.uniform(0.15, 0.32, size=2) * min(h, w)
    ang = rng.uniform(0.0, np.pi)
    ys, xs = np.mgrid[0:h, 0:w] + 0.5
    dy, dx = ys - cy, xs - cx
    u = dx * np.cos(ang) + dy * np.sin(ang)
    v = -dx * np.sin(ang) + dy * np.cos(ang)
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


_DIRECTIONS = ((0, 1), (1, 0), (1, 1), (1, -1))


def interior_chain(region: np.ndarray, label: int, rng, margin=SCRIBBLE_MARGIN, max_len=None):
    """A straight stroke through the deepest interior point of ``region``.

    The stroke stays on pixels at least ``margin`` away from the region border
    and is returned ordered along its direction, or None if the region is too
    thin.
    """
    depth = ndimage.distance_transform_cdt(np.pad(region, 1), metric="chessboard")[1:-1, 1:-1]
    inner = depth > margin
    if not inner.any():
        return None
    cy, cx = np.unravel_index(np.argmax(np.where(inner, depth, -1)), region.shape)
    dy, dx = _DIRECTIONS[rng.integers(len(_DIRECTIONS))]
    h, w = region.shape
    pts = [(cx, cy)]
    for sign in (-1, 1):
        y, x = cy + sign * dy, cx + sign * dx
        run = []
        while 0 <= y < h and 0 <= x < w and inner[y, x]:
            run.append((x, y))
            y, x = y + sign * dy, x + sign * dx
        pts = run[::-1] + pts if sign < 0 else pts + run
    if max_len is not None and len(pts) > max_len:
        start = (len(pts) - max_len) // 2
        pts = pts[start:start + max_len]
    return Chain(label, pts)


def gen_blobs_2d(width=64, height=64, num_labels=3, noise=0.1, contrast=1.0, seed=0,
                 max_scribble=None) -> SyntheticScene:
    """``num_labels - 1`` random ellipses over a background, one stroke per region.

    Region intensities are evenly spaced over a band of width ``contrast``
    centered at 0.5, in a seeded order; Gaussian noise is added and clipped.
    """
    if num_labels < 2:
        raise InvalidArgument("need at least two labels")
    if width < 4 * SCRIBBLE_MARGIN or height < 4 * SCRIBBLE_MARGIN:
        raise InvalidArgument("scene too small for interior scribbles")
    if not 0.0 <= contrast <= 1.0 or noise < 0:
        raise InvalidArgument("contrast must lie in [0, 1] and noise be nonnegative")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_ATTEMPTS):
        labels = np.zeros((height, width), dtype=np.int64)
        for k in range(1, num_labels):
            labels[_ellipse(height, width, rng)] = k
        chains = []
        for k in range(num_labels):
            ch = interior_chain(labels == k, k, rng, max_len=max_scribble)
            if ch is None:
                break
            chains.append(ch)
        if len(chains) == num_labels:
            break
    else:
        raise InvalidArgument("could not place regions with scribble-able interiors")
    levels = 0.5 + contrast * np.linspace(-0.5, 0.5, num_labels)
    levels = levels[rng.permutation(num_labels)]
    img = np.clip(levels[labels] + noise * rng.standard_normal((height, width)), 0.0, 1.0)
    scribbles = ScribbleMask.from_chains(height, width, num_labels, chains)
    params = dict(kind="blobs-2d", width=width, height=height, num_labels=num_labels,
                  noise=noise, contrast=contrast, levels=levels.tolist())
    return SyntheticScene(GridImage(img), Labeling(labels, num_labels), scribbles, seed, params)


def blob_suite(count=20, seed=0, width=64, height=64, labels=(2, 3, 4), noise=0.1,
               contrast=1.0, max_scribble=None):
    """Scenes cycling through ``labels`` with per-scene seeds derived from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(count)
    return [gen_blobs_2d(width, height, labels[i % len(labels)], noise, contrast, int(s),
                         max_scribble)
            for i, s in enumerate(seeds)]
