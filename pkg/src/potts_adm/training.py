"""Phase-1 pCE training and the two regularized-loss trainers (GD and ADM).

Both trainers minimize a per-image loss and average gradients over the
minibatch in image order. Per-image gradients are divided by the pixel count
before averaging, which only rescales the learning rate.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core_types import GridImage, Labeling, PairwiseGraph, ScribbleMask, SoftSegmentation, softmax
from .energy import (
    PROB_EPS, EnergyParams, adm_unary_from_prediction, build_dense_weights,
    build_grid_weights, estimate_sigma2, potts_energy, relaxed_potts_energy,
    relaxed_potts_gradient,
)
from .errors import InvalidArgument, SolverFailure
from .model import (
    ModelParams, PixelFeatures, SgdConfig, backward, pixel_features, scores,
    sgd_step, softmax_backward,
)
from .solvers import DiscreteProblem, solve

log = logging.getLogger(__name__)

TRACE_FIELDS = ("iter", "pce", "grid_crf_discrete", "relaxed_crf", "latent_energy", "wall_ms")


@dataclass(frozen=True)
class Sample:
    """One training image with its scribbles, features and Potts graphs.

    ``grid_graph`` defines the discrete grid-CRF loss that is reported;
    ``crf_graph`` is the regularizer actually trained against (the same
    object for grid CRF, a truncated dense graph otherwise).
    """

    image: GridImage
    mask: ScribbleMask
    features: PixelFeatures
    grid_graph: PairwiseGraph
    crf_graph: PairwiseGraph
    gt: Optional[Labeling] = None

    @property
    def num_labels(self) -> int:
        return self.mask.num_labels

    @property
    def num_pixels(self) -> int:
        return self.image.num_pixels


@dataclass(frozen=True)
class FeatureConfig:
    num_fourier: int = 64
    scale: float = 5.0
    seed: int = 0
    context_sigmas: tuple = ()


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "adm"
    lam: float = 1.0
    gamma: float = 1.0
    sgd: SgdConfig = field(default_factory=SgdConfig)
    solver: str = "alpha_expansion"
    solver_sweeps: int = 5
    connectivity: str = "grid4"
    delta: float = 8.0
    spatial_radius: Optional[float] = None
    eval_cadence: int = 10
    warm_start: bool = True

    def __post_init__(self):
        if self.mode not in ("gd", "adm"):
            raise InvalidArgument(f"mode must be 'gd' or 'adm', got {self.mode!r}")
        if self.mode == "adm" and not self.gamma > 0:
            raise InvalidArgument("ADM needs gamma > 0")
        if self.lam < 0:
            raise InvalidArgument("lam must be nonnegative")
        if self.solver not in ("alpha_expansion", "maxflow_binary", "icm"):
            raise InvalidArgument(f"unknown solver {self.solver!r}")
        if self.connectivity not in ("grid4", "grid8", "dense"):
            raise InvalidArgument(f"unknown connectivity {self.connectivity!r}")
        if self.mode == "adm" and self.connectivity == "dense":
            raise InvalidArgument("ADM trains the grid CRF only")
        if self.eval_cadence < 1:
            raise InvalidArgument("eval_cadence must be >= 1")

    def grid_params(self, sigma2=1.0) -> EnergyParams:
        conn = self.connectivity if self.connectivity != "dense" else "grid4"
        return EnergyParams(lam=self.lam, sigma2=sigma2, connectivity=conn)

    def dense_params(self, sigma2=1.0) -> EnergyParams:
        return EnergyParams(lam=self.lam, sigma2=sigma2, delta=self.delta,
                            spatial_radius=self.spatial_radius, connectivity="dense")


def make_sample(image: GridImage, mask: ScribbleMask, config: TrainConfig,
                features: FeatureConfig = FeatureConfig(), gt: Optional[Labeling] = None) -> Sample:
    conn = config.connectivity if config.connectivity != "dense" else "grid4"
    sigma2 = estimate_sigma2(image, conn)
    grid = build_grid_weights(image, config.grid_params(sigma2))
    if config.connectivity == "dense":
        crf = build_dense_weights(image, config.dense_params(sigma2))
    else:
        crf = grid
    feats = pixel_features(image, features.num_fourier, features.scale, features.seed,
                           features.context_sigmas)
    return Sample(image, mask, feats, grid, crf, gt)


# ---------------------------------------------------------------- losses

def partial_cross_entropy(seg, mask: ScribbleMask):
    """Cross-entropy summed over scribbled pixels.

    Returns ``(loss, dscores)`` where ``dscores`` is the gradient w.r.t. the
    pre-softmax scores, ``(num_pixels, K)``, zero off the scribbles.
    """
    probs = seg.flat() if isinstance(seg, SoftSegmentation) else np.asarray(seg).reshape(-1, mask.num_labels)
    if probs.shape[0] != mask.labels.size:
        raise InvalidArgument("segmentation and scribble mask differ in size")
    labeled = mask.labeled.reshape(-1)
    y = mask.labels.reshape(-1)[labeled]
    p_lab = probs[labeled]
    loss = float(-np.sum(np.log(np.maximum(p_lab[np.arange(y.size), y], PROB_EPS))))
    grad = np.zeros_like(probs)
    g = p_lab.copy()
    g[np.arange(y.size), y] -= 1.0
    grad[labeled] = g
    return loss, grad


def latent_cross_entropy(probs: np.ndarray, mask: ScribbleMask, latent: np.ndarray, gamma: float):
    """``gamma * sum_{unlabeled} -log S_p[X_p]`` and its gradient w.r.t. scores.

    For one-hot ``X_p`` this is the KL divergence from ``X_p`` to ``S_p``.
    """
    unl = ~mask.labeled.reshape(-1)
    x = latent[unl]
    p_unl = probs[unl]
    loss = float(-gamma * np.sum(np.log(np.maximum(p_unl[np.arange(x.size), x], PROB_EPS))))
    grad = np.zeros_like(probs)
    g = p_unl.copy()
    g[np.arange(x.size), x] -= 1.0
    grad[unl] = gamma * g
    return loss, grad


def relaxed_crf_loss(probs: np.ndarray, graph: PairwiseGraph):
    """Relaxed Potts value and its gradient w.r.t. pre-softmax scores."""
    value = relaxed_potts_energy(probs, graph)
    dprobs = relaxed_potts_gradient(probs, graph)
    return value, softmax_backward(probs, dprobs)


def gd_loss_and_grad(params: ModelParams, sample: Sample):
    """Total GD objective (pCE + relaxed CRF) and its parameter gradients."""
    probs = softmax(scores(params, sample.features), axis=1)
    pce, g1 = partial_cross_entropy(probs, sample.mask)
    crf, g2 = relaxed_crf_loss(probs, sample.crf_graph)
    return pce + crf, backward(params, sample.features, g1 + g2)


def adm_loss_and_grad(params: ModelParams, sample: Sample, latent: np.ndarray, gamma: float):
    """Network-step objective for fixed latent labels and its parameter gradients."""
    probs = softmax(scores(params, sample.features), axis=1)
    pce, g1 = partial_cross_entropy(probs, sample.mask)
    kl, g2 = latent_cross_entropy(probs, sample.mask, latent, gamma)
    return pce + kl, backward(params, sample.features, g1 + g2)


# ---------------------------------------------------------------- traces

@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    constraint_violations: int = 0
    latent_solves: int = 0

    def add(self, **rec):
        self.records.append(rec)

    def column(self, name):
        return [r.get(name) for r in self.records]

    @property
    def final(self):
        return self.records[-1] if self.records else None

    def write_csv(self, path, include_wall=True):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRACE_FIELDS)
            for rec in self.records:
                row = []
                for name in TRACE_FIELDS:
                    v = rec.get(name)
                    if name == "wall_ms" and not include_wall:
                        v = None
                    row.append("" if v is None else (str(v) if name == "iter" else repr(float(v))))
                writer.writerow(row)


def _batches(samples, batch_size):
    """Cyclic minibatches in fixed sample order."""
    n = len(samples)
    i = 0
    while True:
        yield [samples[(i + j) % n] for j in range(min(batch_size, n))]
        i = (i + batch_size) % n


def _average(grad_list, weights):
    out = []
    for layer_grads in zip(*grad_list):
        gw = sum(wt * g[0] for wt, g in zip(weights, layer_grads))
        gb = sum(wt * g[1] for wt, g in zip(weights, layer_grads))
        out.append((gw, gb))
    return out


def _evaluate(params, samples):
    """Mean pCE, discrete grid CRF of the argmax and relaxed CRF over samples."""
    pce = grid = relaxed = 0.0
    for s in samples:
        probs = softmax(scores(params, s.features), axis=1)
        pce += partial_cross_entropy(probs, s.mask)[0]
        grid += potts_energy(np.argmax(probs, axis=1), s.grid_graph)
        relaxed += relaxed_potts_energy(probs, s.crf_graph)
    n = len(samples)
    return pce / n, grid / n, relaxed / n


def _should_log(it, total, cadence):
    return it % cadence == 0 or it == total


def train_phase1(params: ModelParams, samples, sgd: SgdConfig, eval_cadence: int = 10):
    """SGD on partial cross-entropy only."""
    trace = TrainTrace()
    params = params.copy()
    state = None
    batches = _batches(samples, sgd.batch_size)
    start = time.perf_counter()
    for it in range(sgd.phase1_iters + 1):
        batch = next(batches)
        losses, grads = [], []
        for s in batch:
            probs = softmax(scores(params, s.features), axis=1)
            loss, g = partial_cross_entropy(probs, s.mask)
            losses.append(loss)
            grads.append(backward(params, s.features, g))
        if _should_log(it, sgd.phase1_iters, eval_cadence):
            trace.add(iter=it, pce=float(np.mean(losses)),
                      wall_ms=(time.perf_counter() - start) * 1e3)
        if it == sgd.phase1_iters:
            break
        grads = _average(grads, [1.0 / (len(batch) * s.num_pixels) for s in batch])
        params, state = sgd_step(params, grads, sgd, state)
    return params, trace


def train_gd(params: ModelParams, samples, config: TrainConfig):
    """Gradient descent on pCE + relaxed Potts of the network output."""
    sgd = config.sgd
    trace = TrainTrace()
    params = params.copy()
    state = None
    batches = _batches(samples, sgd.batch_size)
    start = time.perf_counter()
    for it in range(sgd.phase2_iters + 1):
        if _should_log(it, sgd.phase2_iters, config.eval_cadence):
            pce, grid, relaxed = _evaluate(params, samples)
            trace.add(iter=it, pce=pce, grid_crf_discrete=grid, relaxed_crf=relaxed,
                      latent_energy=None, wall_ms=(time.perf_counter() - start) * 1e3)
        if it == sgd.phase2_iters:
            break
        batch = next(batches)
        grads = [gd_loss_and_grad(params, s)[1] for s in batch]
        grads = _average(grads, [1.0 / (len(batch) * s.num_pixels) for s in batch])
        params, state = sgd_step(params, grads, sgd, state)
    return params, trace


def solve_latent(sample: Sample, probs: np.ndarray, config: TrainConfig, init=None):
    """Discrete step: minimize Potts + gamma * KL subject to the scribbles."""
    seg = SoftSegmentation(probs.reshape(sample.image.height, sample.image.width, -1))
    unary = adm_unary_from_prediction(seg, sample.mask, config.gamma)
    problem = DiscreteProblem(unary, sample.crf_graph, sample.num_labels,
                              sample.image.height, sample.image.width)
    if init is None or not config.warm_start:
        init = np.argmax(probs, axis=1)
    init = np.asarray(init, dtype=np.int64).copy()
    labeled = sample.mask.labeled.reshape(-1)
    init[labeled] = sample.mask.labels.reshape(-1)[labeled]
    report = solve(config.solver, problem, init, config.solver_sweeps)
    return problem, report


def train_adm(params: ModelParams, samples, config: TrainConfig):
    """Alternate a discrete latent-labeling solve with an SGD step per minibatch."""
    sgd = config.sgd
    trace = TrainTrace()
    params = params.copy()
    state = None
    latents = {}
    order = {id(s): i for i, s in enumerate(samples)}
    batches = _batches(samples, sgd.batch_size)
    start = time.perf_counter()
    for it in range(sgd.phase2_iters + 1):
        log_now = _should_log(it, sgd.phase2_iters, config.eval_cadence)
        if it == sgd.phase2_iters:
            if log_now:
                pce, grid, relaxed = _evaluate(params, samples)
                trace.add(iter=it, pce=pce, grid_crf_discrete=grid, relaxed_crf=relaxed,
                          latent_energy=None, wall_ms=(time.perf_counter() - start) * 1e3)
            break
        batch = next(batches)
        grads, energies = [], []
        for s in batch:
            key = order[id(s)]
            probs = softmax(scores(params, s.features), axis=1)
            try:
                _, report = solve_latent(s, probs, config, latents.get(key))
            except Exception as exc:
                raise SolverFailure(it, exc) from exc
            x = report.labeling.flat()
            labeled = s.mask.labeled.reshape(-1)
            trace.constraint_violations += int(np.sum(x[labeled] != s.mask.labels.reshape(-1)[labeled]))
            trace.latent_solves += 1
            latents[key] = x
            energies.append(report.final_energy)
            grads.append(adm_loss_and_grad(params, s, x, config.gamma)[1])
        if log_now:
            pce, grid, relaxed = _evaluate(params, samples)
            trace.add(iter=it, pce=pce, grid_crf_discrete=grid, relaxed_crf=relaxed,
                      latent_energy=float(np.mean(energies)),
                      wall_ms=(time.perf_counter() - start) * 1e3)
        grads = _average(grads, [1.0 / (len(batch) * s.num_pixels) for s in batch])
        params, state = sgd_step(params, grads, sgd, state)
    return params, trace


def train(params: ModelParams, samples, config: TrainConfig):
    if config.mode == "gd":
        return train_gd(params, samples, config)
    return train_adm(params, samples, config)
