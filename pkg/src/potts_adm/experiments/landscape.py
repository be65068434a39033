"""Potts cost of every step segmentation of a 1D image, grid vs dense weights."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from ..core_types import GridImage
from ..energy import EnergyParams, build_dense_weights, build_grid_weights, estimate_sigma2, potts_energy
from ..errors import InvalidArgument
from .synthetic import random_staircase


@dataclass(frozen=True)
class Landscape:
    t: np.ndarray
    grid: np.ndarray
    dense: np.ndarray

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["t", "grid_cost", "dense_cost"])
            for t, g, d in zip(self.t, self.grid, self.dense):
                w.writerow([int(t), repr(float(g)), repr(float(d))])


def step_labeling(length: int, t: int) -> np.ndarray:
    """Label 0 left of ``t`` and 1 from ``t`` on."""
    return (np.arange(length) >= t).astype(np.int64)


def landscape_1d(scene_or_image, params_grid: EnergyParams, params_dense: EnergyParams) -> Landscape:
    """Evaluate the Potts energy of ``S^t`` for every split point ``t = 1..N-1``."""
    image = getattr(scene_or_image, "image", scene_or_image)
    if not isinstance(image, GridImage) or image.height != 1:
        raise InvalidArgument("landscape_1d needs a 1 x N image")
    n = image.width
    grid = build_grid_weights(image, params_grid)
    dense = build_dense_weights(image, params_dense)
    ts = np.arange(1, n)
    g = np.array([potts_energy(step_labeling(n, t), grid) for t in ts])
    d = np.array([potts_energy(step_labeling(n, t), dense) for t in ts])
    return Landscape(ts, g, d)


def default_landscape_params(image: GridImage, lam=1.0, delta=4.0, radius=None):
    """Grid and dense parameters sharing the neighbor-difference bandwidth."""
    sigma2 = estimate_sigma2(image, "grid4")
    grid = EnergyParams(lam=lam, sigma2=sigma2, connectivity="grid4")
    dense = EnergyParams(lam=lam, sigma2=sigma2, delta=delta, spatial_radius=radius,
                         connectivity="dense")
    return grid, dense


def strict_local_minima(curve) -> int:
    """Interior points strictly below both neighbors."""
    c = np.asarray(curve, dtype=np.float64)
    if c.size < 3:
        return 0
    mid = c[1:-1]
    return int(np.sum((mid < c[:-2]) & (mid < c[2:])))


def landscape_suite(count=20, seed=0, lam=1.0, delta=4.0, radius=None, out_dir=None):
    """Landscapes of seeded noisy staircases with per-scene verdicts."""
    seeds = np.random.SeedSequence(seed).generate_state(count)
    rows = []
    for i, s in enumerate(seeds):
        scene = random_staircase(int(s))
        grid, dense = default_landscape_params(scene.image, lam, delta, radius)
        land = landscape_1d(scene, grid, dense)
        if out_dir is not None:
            land.write_csv(os.path.join(out_dir, f"landscape_{i:02d}.csv"))
        dominant = scene.params["dominant"]
        rows.append(dict(
            scene=i, seed=int(s), dominant=dominant,
            grid_argmin=int(land.t[np.argmin(land.grid)]),
            dense_argmin=int(land.t[np.argmin(land.dense)]),
            grid_minima=strict_local_minima(land.grid),
            dense_minima=strict_local_minima(land.dense),
        ))
    summary = dict(
        num_scenes=count,
        grid_argmin_at_dominant=sum(r["grid_argmin"] == r["dominant"] for r in rows),
        dense_not_rougher=sum(r["dense_minima"] <= r["grid_minima"] for r in rows),
        scenes=rows,
    )
    if out_dir is not None:
        with open(os.path.join(out_dir, "landscape.json"), "w") as f:
            json.dump(summary, f, indent=1, sort_keys=True)
            f.write("\n")
    return summary
