import csv
import json

import numpy as np
import pytest

from potts_adm.core_types import GridImage
from potts_adm.errors import InvalidArgument
from potts_adm.experiments.landscape import (
    default_landscape_params, landscape_1d, landscape_suite, strict_local_minima,
)
from potts_adm.experiments.synthetic import random_staircase


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_grid_curve_is_single_edge_weight(seed):
    scene = random_staircase(seed)
    grid, dense = default_landscape_params(scene.image, lam=1.3, delta=3.0)
    land = landscape_1d(scene, grid, dense)
    x = scene.image.data[0, :, 0]
    expected = 1.3 * np.exp(-(x[1:] - x[:-1]) ** 2 / (2 * grid.sigma2))
    np.testing.assert_array_equal(land.t, np.arange(1, x.size))
    np.testing.assert_allclose(land.grid, expected, rtol=1e-15)


def test_dense_curve_matches_pair_sum():
    scene = random_staircase(4, length=40)
    grid, dense = default_landscape_params(scene.image, delta=2.0, radius=5.0)
    land = landscape_1d(scene, grid, dense)
    x = scene.image.data[0, :, 0]
    n = x.size
    for t in range(1, n):
        total = 0.0
        for p in range(t):
            for q in range(t, n):
                if q - p <= 5.0:
                    total += np.exp(-(x[p] - x[q]) ** 2 / dense.sigma2) * np.exp(-(q - p) ** 2 / 4.0)
        assert land.dense[t - 1] == pytest.approx(total, rel=1e-12)


def test_landscape_needs_1d():
    image = GridImage(np.zeros((2, 5)))
    grid, dense = default_landscape_params(GridImage(np.linspace(0, 1, 5)[None, :]))
    with pytest.raises(InvalidArgument):
        landscape_1d(image, grid, dense)


def test_strict_local_minima():
    assert strict_local_minima([3, 1, 2, 0, 4]) == 2
    assert strict_local_minima([1, 1, 1]) == 0
    assert strict_local_minima([1, 0]) == 0
    assert strict_local_minima([2, 1, 1, 2]) == 0


def test_suite_outputs(tmp_path):
    res = landscape_suite(count=3, seed=1, out_dir=tmp_path)
    assert res["num_scenes"] == 3 and len(res["scenes"]) == 3
    assert json.loads((tmp_path / "landscape.json").read_text()) == res
    with open(tmp_path / "landscape_00.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["t", "grid_cost", "dense_cost"] and len(rows) == 96
    assert landscape_suite(count=3, seed=1) == res
