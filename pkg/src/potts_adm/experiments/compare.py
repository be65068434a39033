"""GD vs ADM comparison runs and the shortened-scribble sweep.

Every scene is trained on its own: phase 1 once, then each method starts from
the same phase-1 parameters with the same budget. Outputs go to a run
directory as CSV/JSON; only the ``wall_ms`` trace column depends on timing.
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from ..core_types import Labeling, shorten_scribbles
from ..errors import InvalidArgument
from ..metrics import evaluate
from ..model import SgdConfig, forward, init_params, save_params
from ..pnm import write_labeling_raster
from ..training import FeatureConfig, TrainConfig, TrainTrace, make_sample, train, train_phase1
from .synthetic import blob_suite

log = logging.getLogger(__name__)

METHODS = ("pce", "gd", "gd_dense", "adm")

DEFAULT_CONFIG = {
    "suite": {
        "count": 20, "seed": 0, "width": 64, "height": 64, "labels": [2, 3, 4],
        "noise": 0.15, "contrast": 1.0, "max_scribble": None,
    },
    "features": {"num_fourier": 64, "scale": 5.0, "seed": 0, "context_sigmas": []},
    "model": {"hidden": 0, "seed": 0},
    "sgd": {
        "learning_rate": 20.0, "momentum": 0.9, "batch_size": 1,
        "phase1_iters": 200, "phase2_iters": 300, "seed": 0,
    },
    "crf": {
        "lam": 3.0, "lam_dense": 0.3, "gamma": 1.0, "solver": "alpha_expansion", "solver_sweeps": 5,
        "delta": 4.0, "spatial_radius": None, "warm_start": True,
    },
    "eval": {"cadence": 1, "radii": [8, 16]},
    "methods": ["gd", "adm"],
    "shorten": {"ratios": [1.0, 0.5, 0.3, 0.0], "methods": ["pce", "gd", "gd_dense", "adm"],
                "count": 6},
    "output": {"save_params": False},
}


def _merge(base: dict, extra: dict, path=""):
    for key, val in extra.items():
        if key not in base:
            raise InvalidArgument(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise InvalidArgument(f"config key {path + key!r} must be a mapping")
            _merge(base[key], val, path + key + ".")
        else:
            base[key] = val


def parse_override(text: str) -> dict:
    """``a.b=value`` to ``{"a": {"b": value}}``; the value is parsed as YAML."""
    if "=" not in text:
        raise InvalidArgument(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    out = yaml.safe_load(raw) if raw.strip() else None
    for part in reversed(key.strip().split(".")):
        out = {part: out}
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict

    @classmethod
    def load(cls, path=None, overrides=()) -> "ExperimentConfig":
        data = copy.deepcopy(DEFAULT_CONFIG)
        if path is not None:
            with open(path) as f:
                loaded = yaml.safe_load(f) or {}
            if not isinstance(loaded, dict):
                raise InvalidArgument(f"{path}: top level must be a mapping")
            _merge(data, loaded)
        for text in overrides:
            _merge(data, parse_override(text))
        cfg = cls(data)
        cfg.validate()
        return cfg

    def with_overrides(self, *overrides) -> "ExperimentConfig":
        data = copy.deepcopy(self.data)
        for text in overrides:
            _merge(data, parse_override(text))
        cfg = ExperimentConfig(data)
        cfg.validate()
        return cfg

    def validate(self):
        for m in self.data["methods"] + self.data["shorten"]["methods"]:
            if m not in METHODS:
                raise InvalidArgument(f"unknown method {m!r}; choose from {METHODS}")
        for r in self.data["shorten"]["ratios"]:
            if not 0.0 <= float(r) <= 1.0:
                raise InvalidArgument("shorten ratios must lie in [0, 1]")
        self.sgd()
        for m in METHODS:
            self.train_config(m)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=False)

    def sgd(self) -> SgdConfig:
        return SgdConfig(**self.data["sgd"])

    def features(self) -> FeatureConfig:
        f = self.data["features"]
        return FeatureConfig(int(f["num_fourier"]), float(f["scale"]), int(f["seed"]),
                             tuple(float(s) for s in f["context_sigmas"]))

    def train_config(self, method: str) -> TrainConfig:
        c = self.data["crf"]
        common = dict(gamma=float(c["gamma"]), sgd=self.sgd(), solver=c["solver"],
                      solver_sweeps=int(c["solver_sweeps"]), delta=float(c["delta"]),
                      spatial_radius=c["spatial_radius"], warm_start=bool(c["warm_start"]),
                      eval_cadence=int(self.data["eval"]["cadence"]))
        lam = float(c["lam"])
        if method == "pce":
            return TrainConfig(mode="gd", lam=0.0, connectivity="grid4", **common)
        if method == "gd":
            return TrainConfig(mode="gd", lam=lam, connectivity="grid4", **common)
        if method == "gd_dense":
            lam_dense = lam if c["lam_dense"] is None else float(c["lam_dense"])
            return TrainConfig(mode="gd", lam=lam_dense, connectivity="dense", **common)
        if method == "adm":
            return TrainConfig(mode="adm", lam=lam, connectivity="grid4", **common)
        raise InvalidArgument(f"unknown method {method!r}")

    def suite(self, count=None):
        s = self.data["suite"]
        return blob_suite(count if count is not None else int(s["count"]), int(s["seed"]),
                          int(s["width"]), int(s["height"]), tuple(s["labels"]),
                          float(s["noise"]), float(s["contrast"]), s["max_scribble"])


@dataclass
class SceneResult:
    index: int
    num_labels: int
    phase1: TrainTrace
    traces: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    preds: dict = field(default_factory=dict)

    def final_grid(self, method) -> float:
        return float(self.traces[method].final["grid_crf_discrete"])


@dataclass
class ComparisonResult:
    config: ExperimentConfig
    methods: list
    scenes: list

    def summary(self) -> dict:
        return summarize(self.scenes, self.methods)


def hit_iteration(trace: TrainTrace, target: float):
    """First logged iteration whose discrete grid-CRF loss is at most ``target``."""
    for rec in trace.records:
        if rec["grid_crf_discrete"] <= target:
            return int(rec["iter"])
    return None


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def summarize(scenes, methods) -> dict:
    out = {"methods": {}}
    for m in methods:
        reps = [s.reports.get(m) for s in scenes]
        reps = [r for r in reps if r is not None]
        entry = {"final_grid_crf": _mean([s.final_grid(m) for s in scenes])}
        if reps:
            entry["miou"] = _mean([r.miou for r in reps])
            entry["pixel_accuracy"] = _mean([r.pixel_accuracy for r in reps])
            for key in reps[0].trimap_accuracy:
                entry[f"trimap_{key}"] = _mean([r.trimap_accuracy[key] for r in reps])
        if m == "adm":
            entry["constraint_violations"] = int(sum(s.traces[m].constraint_violations for s in scenes))
            entry["latent_solves"] = int(sum(s.traces[m].latent_solves for s in scenes))
        out["methods"][m] = entry
    if "gd" in methods and "adm" in methods:
        gd = out["methods"]["gd"]["final_grid_crf"]
        adm = out["methods"]["adm"]["final_grid_crf"]
        per_scene, fewer = [], 0
        for s in scenes:
            target = s.final_grid("gd")
            ha = hit_iteration(s.traces["adm"], target)
            hg = hit_iteration(s.traces["gd"], target)
            earlier = ha is not None and ha < hg
            fewer += earlier
            per_scene.append({"scene": s.index, "gd_final": s.final_grid("gd"),
                              "adm_final": s.final_grid("adm"), "adm_hit": ha, "gd_hit": hg,
                              "adm_earlier": earlier})
        out["adm_vs_gd"] = {
            "loss_ratio": adm / gd if gd > 0 else None,
            "relative_reduction": 1.0 - adm / gd if gd > 0 else None,
            "scenes_adm_earlier": fewer,
            "num_scenes": len(scenes),
            "per_scene": per_scene,
        }
    return out


def run_scene(index, scene, config: ExperimentConfig, methods) -> SceneResult:
    """Phase 1 once, then every method from the same phase-1 parameters."""
    feats = config.features()
    base = make_sample(scene.image, scene.scribbles, config.train_config("gd"), feats, scene.gt)
    samples = {"gd": base, "adm": base}
    if "pce" in methods:
        # reported loss keeps the shared lambda; the trained regularizer is off
        samples["pce"] = replace(base, crf_graph=base.grid_graph.scaled(0.0))
    if "gd_dense" in methods:
        dense = make_sample(scene.image, scene.scribbles, config.train_config("gd_dense"),
                            replace(feats, num_fourier=0), scene.gt)
        samples["gd_dense"] = replace(base, crf_graph=dense.crf_graph)
    model = config.data["model"]
    p0 = init_params(base.features.dim, scene.scribbles.num_labels, int(model["hidden"]),
                     int(model["seed"]))
    sgd = config.sgd()
    p1, tr1 = train_phase1(p0, [base], sgd, int(config.data["eval"]["cadence"]))
    result = SceneResult(index, scene.scribbles.num_labels, tr1)
    radii = tuple(int(r) for r in config.data["eval"]["radii"])
    for m in methods:
        tc = config.train_config(m)
        params, trace = train(p1, [samples[m]], tc)
        result.traces[m] = trace
        result.params[m] = params
        pred = forward(params, base.features).argmax()
        result.preds[m] = pred
        if scene.gt is not None:
            result.reports[m] = evaluate(pred, scene.gt, scene.scribbles.num_labels, radii)
        log.info("scene %d %s final grid crf %.4f", index, m, result.final_grid(m))
    return result


def run_comparison(scenes, config: ExperimentConfig, out_dir=None, methods=None) -> ComparisonResult:
    methods = list(methods if methods is not None else config.data["methods"])
    results = [run_scene(i, sc, config, methods) for i, sc in enumerate(scenes)]
    res = ComparisonResult(config, methods, results)
    if out_dir is not None:
        write_comparison(res, out_dir)
    return res


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_config(config: ExperimentConfig, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.yaml"), "w") as f:
        f.write(config.to_yaml())


def write_comparison(res: ComparisonResult, out_dir):
    os.makedirs(os.path.join(out_dir, "traces"), exist_ok=True)
    write_config(res.config, out_dir)
    scenes_json = []
    for s in res.scenes:
        stem = os.path.join(out_dir, "traces", f"scene_{s.index:02d}")
        s.phase1.write_csv(f"{stem}_phase1.csv")
        entry = {"scene": s.index, "num_labels": s.num_labels, "methods": {}}
        for m in res.methods:
            tr = s.traces[m]
            tr.write_csv(f"{stem}_{m}.csv")
            fin = tr.final
            entry["methods"][m] = {
                "final_grid_crf": fin["grid_crf_discrete"],
                "final_relaxed_crf": fin["relaxed_crf"],
                "final_pce": fin["pce"],
                "eval": json.loads(s.reports[m].to_json()) if m in s.reports else None,
            }
            if m == "adm":
                entry["methods"][m]["constraint_violations"] = tr.constraint_violations
            if res.config.data["output"]["save_params"]:
                save_params(f"{stem}_{m}.params", s.params[m])
                write_labeling_raster(f"{stem}_{m}_pred.pgm", s.preds[m])
        scenes_json.append(entry)
    summary = res.summary()
    with open(os.path.join(out_dir, "report.json"), "w") as f:
        json.dump({"scenes": scenes_json, "summary": summary}, f, indent=1, sort_keys=True)
        f.write("\n")
    _write_summary_csv(os.path.join(out_dir, "summary.csv"), summary, res.methods)


SUMMARY_FIELDS = ("method", "final_grid_crf", "miou", "pixel_accuracy", "trimap_8", "trimap_16")


def _write_summary_csv(path, summary, methods):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for m in methods:
            e = summary["methods"][m]
            w.writerow([m] + [_fmt(e.get(k)) for k in SUMMARY_FIELDS[1:]])
        if "adm_vs_gd" in summary:
            v = summary["adm_vs_gd"]
            w.writerow([])
            w.writerow(["verdict", "loss_ratio", "scenes_adm_earlier", "num_scenes"])
            w.writerow(["adm_vs_gd", _fmt(v["loss_ratio"]), _fmt(v["scenes_adm_earlier"]),
                        _fmt(v["num_scenes"])])


SWEEP_FIELDS = ("ratio", "method", "scribbled_pixels", "miou", "pixel_accuracy",
                "trimap_8", "trimap_16", "final_grid_crf")


def shorten_sweep(scenes, config: ExperimentConfig, out_dir=None, ratios=None, methods=None):
    """Re-run the comparison with strokes trimmed to each keep ratio."""
    ratios = [float(r) for r in (ratios if ratios is not None else config.data["shorten"]["ratios"])]
    methods = list(methods if methods is not None else config.data["shorten"]["methods"])
    rows = []
    for ratio in ratios:
        trimmed = [_with_scribbles(sc, shorten_scribbles(sc.scribbles, ratio)) for sc in scenes]
        sub_dir = None if out_dir is None else os.path.join(out_dir, f"ratio_{ratio:.2f}")
        res = run_comparison(trimmed, config, sub_dir, methods)
        summ = res.summary()
        labeled = int(sum(sc.scribbles.num_labeled for sc in trimmed))
        for m in methods:
            e = summ["methods"][m]
            rows.append({"ratio": ratio, "method": m, "scribbled_pixels": labeled,
                         "miou": e.get("miou"), "pixel_accuracy": e.get("pixel_accuracy"),
                         "trimap_8": e.get("trimap_8"), "trimap_16": e.get("trimap_16"),
                         "final_grid_crf": e["final_grid_crf"]})
    if out_dir is not None:
        write_config(config, out_dir)
        with open(os.path.join(out_dir, "shorten.csv"), "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(SWEEP_FIELDS)
            for r in rows:
                w.writerow([_fmt(r[k]) if k != "method" else r[k] for k in SWEEP_FIELDS])
    return rows


@dataclass(frozen=True)
class _Scene:
    image: object
    scribbles: object
    gt: Labeling
    seed: object = None
    params: object = None


def _with_scribbles(scene, mask):
    return _Scene(scene.image, mask, scene.gt, getattr(scene, "seed", None),
                  getattr(scene, "params", None))
