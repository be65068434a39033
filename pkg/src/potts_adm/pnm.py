"""Binary PGM/PPM images, scribble rasters and stroke sidecar files.

Scribble rasters are P5 files where value ``k < 255`` is label ``k`` and 255
marks an unlabeled pixel. Strokes live in a text sidecar, one per line::

    label x0 y0 x1 y1 ...
"""

from __future__ import annotations

import numpy as np

from .core_types import UNLABELED, Chain, GridImage, Labeling, ScribbleMask
from .errors import InvalidArgument, UnsupportedInput

UNLABELED_VALUE = 255


def _tokens(buf: bytes, count: int, pos: int = 0):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise UnsupportedInput("truncated PNM header")
        out.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return out, pos + 1


def read_pnm_raw(path) -> np.ndarray:
    """Return the raw 8-bit raster, ``(H, W)`` for P5 and ``(H, W, 3)`` for P6."""
    with open(path, "rb") as f:
        buf = f.read()
    (magic, w, h, maxval), pos = _tokens(buf, 4)
    if magic not in (b"P5", b"P6"):
        raise UnsupportedInput(f"only binary P5/P6 files are supported, got {magic!r}")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise UnsupportedInput(f"only maxval 255 is supported, got {maxval}")
    channels = 1 if magic == b"P5" else 3
    size = w * h * channels
    data = np.frombuffer(buf, dtype=np.uint8, count=size, offset=pos)
    if channels == 1:
        return data.reshape(h, w).copy()
    return data.reshape(h, w, 3).copy()


def write_pnm_raw(path, raster: np.ndarray):
    raster = np.asarray(raster)
    if raster.dtype != np.uint8:
        raise InvalidArgument("raw rasters must be uint8")
    if raster.ndim == 2:
        magic, (h, w) = b"P5", raster.shape
    elif raster.ndim == 3 and raster.shape[2] == 3:
        magic, (h, w) = b"P6", raster.shape[:2]
    else:
        raise InvalidArgument(f"cannot write raster of shape {raster.shape}")
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(raster).tobytes())


def read_image(path) -> GridImage:
    raw = read_pnm_raw(path)
    return GridImage(raw.astype(np.float64) / 255.0)


def write_image(path, image: GridImage):
    raster = np.round(image.data * 255.0).astype(np.uint8)
    if image.channels == 1:
        raster = raster[:, :, 0]
    write_pnm_raw(path, raster)


def read_chains(path) -> list[Chain]:
    chains = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split()
            if not fields or fields[0].startswith("#"):
                continue
            if len(fields) < 3 or len(fields) % 2 == 0:
                raise UnsupportedInput(f"{path}:{lineno}: expected 'label x0 y0 ...'")
            vals = [int(v) for v in fields]
            pts = list(zip(vals[1::2], vals[2::2]))
            chains.append(Chain(vals[0], pts))
    return chains


def write_chains(path, chains):
    with open(path, "w") as f:
        for ch in chains:
            coords = " ".join(f"{x} {y}" for x, y in ch.points)
            f.write(f"{ch.label} {coords}\n")


def read_scribbles(path, num_labels: int, chains_path=None) -> ScribbleMask:
    raw = read_pnm_raw(path)
    if raw.ndim != 2:
        raise UnsupportedInput("scribble raster must be a P5 file")
    labels = raw.astype(np.int64)
    labels[raw == UNLABELED_VALUE] = UNLABELED
    chains = None
    if chains_path is not None:
        chains = tuple(read_chains(chains_path))
    return ScribbleMask(labels, num_labels, chains)


def write_scribbles(path, mask: ScribbleMask, chains_path=None):
    if mask.num_labels >= UNLABELED_VALUE:
        raise InvalidArgument("at most 255 labels fit in a scribble raster")
    raster = np.where(mask.labeled, mask.labels, UNLABELED_VALUE).astype(np.uint8)
    write_pnm_raw(path, raster)
    if chains_path is not None:
        if mask.chains is None:
            raise UnsupportedInput("mask has no chains to write")
        write_chains(chains_path, mask.chains)


def read_labeling_raster(path, num_labels: int):
    """Ground-truth label maps share the P5 layout (value = label)."""
    raw = read_pnm_raw(path)
    if raw.ndim != 2:
        raise UnsupportedInput("label raster must be a P5 file")
    return Labeling(raw.astype(np.int64), num_labels)


def write_labeling_raster(path, labeling):
    write_pnm_raw(path, labeling.labels.astype(np.uint8))
