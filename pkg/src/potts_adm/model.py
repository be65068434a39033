"""Per-pixel softmax classifier standing in for a segmentation network.

Features are intensities, normalized coordinates and optional fixed random
Fourier features of those; the map is linear or has one ReLU hidden layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core_types import GridImage, SoftSegmentation, softmax
from .errors import InvalidArgument, UnsupportedInput

CHECKPOINT_MAGIC = "potts_adm-params 1"


@dataclass(frozen=True)
class PixelFeatures:
    values: np.ndarray  # (num_pixels, dim)
    height: int
    width: int

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def num_pixels(self) -> int:
        return self.values.shape[0]


def base_features(image: GridImage, context_sigmas=()) -> np.ndarray:
    """Intensities, normalized ``(x, y)`` and optional blurred intensities.

    The blurred copies (one per Gaussian width in ``context_sigmas``) give the
    per-pixel model a small receptive field.
    """
    h, w = image.height, image.width
    ys, xs = np.mgrid[0:h, 0:w]
    coords = np.stack([(xs.reshape(-1) + 0.5) / w, (ys.reshape(-1) + 0.5) / h], axis=1)
    parts = [image.flat(), coords]
    for sigma in context_sigmas:
        blurred = ndimage.gaussian_filter(image.data, sigma=(sigma, sigma, 0), mode="nearest")
        parts.append(blurred.reshape(-1, image.channels))
    return np.concatenate(parts, axis=1)


def pixel_features(image: GridImage, num_fourier: int = 0, scale: float = 5.0,
                   seed: int = 0, context_sigmas=()) -> PixelFeatures:
    """Base features plus ``num_fourier`` fixed cosine projections of them."""
    base = base_features(image, context_sigmas)
    parts = [base]
    if num_fourier > 0:
        rng = np.random.default_rng(seed)
        proj = rng.normal(0.0, scale, size=(base.shape[1], num_fourier))
        phase = rng.uniform(0.0, 2.0 * np.pi, size=num_fourier)
        parts.append(np.cos(base @ proj + phase))
    values = np.concatenate(parts, axis=1)
    values.setflags(write=False)
    return PixelFeatures(values, image.height, image.width)


@dataclass
class ModelParams:
    """Layer weights ``[(W0, b0), (W1, b1)?]``; ReLU between layers."""

    layers: list

    @property
    def num_labels(self) -> int:
        return self.layers[-1][0].shape[1]

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams([(w.copy(), b.copy()) for w, b in self.layers])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.reshape(-1) for layer in self.layers for a in layer])

    def arrays(self):
        return [a for layer in self.layers for a in layer]


def init_params(in_dim: int, num_labels: int, hidden: int = 0, seed: int = 0) -> ModelParams:
    """Gaussian init with std ``0.1 / sqrt(fan_in)``, zero biases."""
    rng = np.random.default_rng(seed)
    dims = [in_dim] + ([hidden] if hidden else []) + [num_labels]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = rng.normal(0.0, 0.1 / np.sqrt(fan_in), size=(fan_in, fan_out))
        layers.append((w, np.zeros(fan_out)))
    return ModelParams(layers)


def _check(params: ModelParams, features: PixelFeatures):
    if features.dim != params.in_dim:
        raise InvalidArgument(f"feature dim {features.dim} != model input {params.in_dim}")


def scores(params: ModelParams, features: PixelFeatures) -> np.ndarray:
    """Pre-softmax scores, ``(num_pixels, K)``."""
    _check(params, features)
    x = features.values
    for i, (w, b) in enumerate(params.layers):
        x = x @ w + b
        if i < len(params.layers) - 1:
            x = np.maximum(x, 0.0)
    return x


def forward(params: ModelParams, features: PixelFeatures) -> SoftSegmentation:
    probs = softmax(scores(params, features), axis=1)
    return SoftSegmentation(probs.reshape(features.height, features.width, -1))


def backward(params: ModelParams, features: PixelFeatures, dscores: np.ndarray) -> list:
    """Parameter gradients given the loss gradient w.r.t. pre-softmax scores."""
    _check(params, features)
    dscores = np.asarray(dscores, dtype=np.float64).reshape(features.num_pixels, -1)
    if dscores.shape[1] != params.num_labels:
        raise InvalidArgument("upstream gradient width differs from the label count")
    acts = [features.values]
    x = features.values
    for w, b in params.layers[:-1]:
        x = np.maximum(x @ w + b, 0.0)
        acts.append(x)
    grads = [None] * len(params.layers)
    g = dscores
    for i in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[i]
        grads[i] = (acts[i].T @ g, g.sum(axis=0))
        if i > 0:
            g = (g @ w.T) * (acts[i] > 0)
    return grads


def softmax_backward(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. probabilities through the softmax Jacobian."""
    return probs * (dprobs - np.sum(probs * dprobs, axis=1, keepdims=True))


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.5
    momentum: float = 0.9
    batch_size: int = 1
    phase1_iters: int = 300
    phase2_iters: int = 300
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidArgument("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidArgument("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise InvalidArgument("batch_size must be >= 1")


def sgd_step(params: ModelParams, grads, config: SgdConfig, state=None):
    """Momentum SGD: ``v <- mu*v + g``; ``theta <- theta - lr*v``."""
    if state is None:
        state = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers]
    new_layers, new_state = [], []
    for (w, b), (gw, gb), (vw, vb) in zip(params.layers, grads, state):
        vw = config.momentum * vw + gw
        vb = config.momentum * vb + gb
        new_layers.append((w - config.learning_rate * vw, b - config.learning_rate * vb))
        new_state.append((vw, vb))
    return ModelParams(new_layers), new_state


def save_params(path, params: ModelParams):
    """Text header with one ``name rows cols`` line per array, then raw <f8 data."""
    lines = [CHECKPOINT_MAGIC, f"layers {len(params.layers)}"]
    for i, (w, b) in enumerate(params.layers):
        lines.append(f"W{i} {w.shape[0]} {w.shape[1]}")
        lines.append(f"b{i} {b.shape[0]} 1")
    lines.append("data")
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        for arr in params.arrays():
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_params(path) -> ModelParams:
    with open(path, "rb") as f:
        if f.readline().decode("ascii").strip() != CHECKPOINT_MAGIC:
            raise UnsupportedInput(f"{path} is not a parameter checkpoint")
        n_layers = int(f.readline().decode("ascii").split()[1])
        shapes = []
        for _ in range(2 * n_layers):
            _, rows, cols = f.readline().decode("ascii").split()
            shapes.append((int(rows), int(cols)))
        if f.readline().decode("ascii").strip() != "data":
            raise UnsupportedInput("malformed checkpoint header")
        arrays = []
        for rows, cols in shapes:
            buf = f.read(8 * rows * cols)
            arrays.append(np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(rows, cols))
    layers = [(arrays[2 * i], arrays[2 * i + 1].reshape(-1)) for i in range(n_layers)]
    return ModelParams(layers)
