"""Scene directories: raster files plus a JSON manifest."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

from ..core_types import GridImage, Labeling, ScribbleMask
from ..errors import UnsupportedInput
from ..pnm import (
    read_image, read_labeling_raster, read_scribbles, write_image,
    write_labeling_raster, write_scribbles,
)

MANIFEST = "scenes.json"


@dataclass(frozen=True)
class SceneFiles:
    """A scene loaded from disk; ``gt`` may be missing."""

    image: GridImage
    scribbles: ScribbleMask
    gt: Optional[Labeling]
    seed: Optional[int] = None
    params: Optional[dict] = None

    @property
    def num_labels(self) -> int:
        return self.scribbles.num_labels


def _ext(image: GridImage) -> str:
    return "pgm" if image.channels == 1 else "ppm"


def save_scenes(out_dir, scenes) -> str:
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, sc in enumerate(scenes):
        stem = f"scene_{i:02d}"
        entry = dict(
            image=f"{stem}.{_ext(sc.image)}",
            scribbles=f"{stem}_scribbles.pgm",
            num_labels=sc.scribbles.num_labels,
            seed=getattr(sc, "seed", None),
            params=getattr(sc, "params", None),
        )
        write_image(os.path.join(out_dir, entry["image"]), sc.image)
        chains = None
        if sc.scribbles.chains is not None:
            entry["chains"] = f"{stem}_chains.txt"
            chains = os.path.join(out_dir, entry["chains"])
        write_scribbles(os.path.join(out_dir, entry["scribbles"]), sc.scribbles, chains)
        if sc.gt is not None:
            entry["gt"] = f"{stem}_gt.pgm"
            write_labeling_raster(os.path.join(out_dir, entry["gt"]), sc.gt)
        entries.append(entry)
    path = os.path.join(out_dir, MANIFEST)
    with open(path, "w") as f:
        json.dump({"scenes": entries}, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def load_scenes(scene_dir):
    path = os.path.join(scene_dir, MANIFEST)
    if not os.path.exists(path):
        raise UnsupportedInput(f"no {MANIFEST} in {scene_dir}")
    with open(path) as f:
        entries = json.load(f)["scenes"]
    scenes = []
    for e in entries:
        k = int(e["num_labels"])
        chains = os.path.join(scene_dir, e["chains"]) if e.get("chains") else None
        gt = read_labeling_raster(os.path.join(scene_dir, e["gt"]), k) if e.get("gt") else None
        scenes.append(SceneFiles(
            read_image(os.path.join(scene_dir, e["image"])),
            read_scribbles(os.path.join(scene_dir, e["scribbles"]), k, chains),
            gt, e.get("seed"), e.get("params"),
        ))
    return scenes
