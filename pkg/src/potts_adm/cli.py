"""Command line entry point: ``potts-adm <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .errors import PottsAdmError
from .experiments.compare import ExperimentConfig, run_comparison, shorten_sweep
from .experiments.landscape import landscape_suite
from .experiments.scene_files import load_scenes, save_scenes
from .experiments.synthetic import random_staircase
from .metrics import evaluate
from .pnm import read_labeling_raster

log = logging.getLogger("potts_adm")


def _add_config_args(p):
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a config entry, e.g. crf.lam=2")
    p.add_argument("--scenes", help="scene directory written by 'synth' (default: generated suite)")
    p.add_argument("--out", required=True, help="run directory")


def _config(args) -> ExperimentConfig:
    return ExperimentConfig.load(args.config, args.overrides)


def _scenes(args, config, count=None):
    if args.scenes:
        return load_scenes(args.scenes)
    return config.suite(count)


def cmd_synth(args):
    if args.kind == "staircase":
        seeds = np.random.SeedSequence(args.seed).generate_state(args.count)
        scenes = [random_staircase(int(s)) for s in seeds]
    else:
        config = ExperimentConfig.load(args.config, args.overrides + [f"suite.seed={args.seed}"])
        scenes = config.suite(args.count)
    path = save_scenes(args.out, scenes)
    print(f"wrote {len(scenes)} scenes to {path}")


def cmd_landscape(args):
    os.makedirs(args.out, exist_ok=True)
    summary = landscape_suite(args.count, args.seed, args.lam, args.delta, args.radius, args.out)
    print(f"grid argmin at dominant edge: {summary['grid_argmin_at_dominant']}/{args.count}")
    print(f"dense curve no rougher than grid: {summary['dense_not_rougher']}/{args.count}")


def _print_summary(summary):
    for m, e in summary["methods"].items():
        miou = e.get("miou")
        miou_s = "n/a" if miou is None else f"{miou:.4f}"
        print(f"{m:>9}  final grid CRF {e['final_grid_crf']:.4f}  mIoU {miou_s}")
    v = summary.get("adm_vs_gd")
    if v:
        print(f"ADM/GD loss ratio {v['loss_ratio']:.4f}; ADM earlier on "
              f"{v['scenes_adm_earlier']}/{v['num_scenes']} scenes")


def cmd_train(args):
    config = _config(args).with_overrides("output.save_params=true")
    scenes = _scenes(args, config)
    res = run_comparison(scenes, config, args.out, methods=[args.method])
    _print_summary(res.summary())


def cmd_compare(args):
    config = _config(args)
    res = run_comparison(_scenes(args, config), config, args.out)
    _print_summary(res.summary())


def cmd_shorten(args):
    config = _config(args)
    scenes = _scenes(args, config, int(config.data["shorten"]["count"]))
    rows = shorten_sweep(scenes, config, args.out)
    for r in rows:
        miou = "n/a" if r["miou"] is None else f"{r['miou']:.4f}"
        print(f"ratio {r['ratio']:.2f} {r['method']:>9} mIoU {miou}")


def cmd_eval(args):
    gt = read_labeling_raster(args.gt, args.num_labels)
    pred = read_labeling_raster(args.pred, args.num_labels)
    report = evaluate(pred, gt, args.num_labels, tuple(args.radii))
    text = report.to_json()
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    print(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="potts-adm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write seeded synthetic scenes to a directory")
    p.add_argument("--kind", choices=("blobs", "staircase"), default="blobs")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("landscape", help="step-segmentation cost curves on 1D staircases")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=4.0)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("train", help="phase 1 plus one trainer per scene")
    _add_config_args(p)
    p.add_argument("--method", choices=("pce", "gd", "gd_dense", "adm"), default="adm")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="GD vs ADM from shared phase-1 parameters")
    _add_config_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("shorten-sweep", help="compare methods with trimmed scribbles")
    _add_config_args(p)
    p.set_defaults(func=cmd_shorten)

    p = sub.add_parser("eval", help="score a predicted label raster against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--num-labels", type=int, required=True)
    p.add_argument("--radii", type=int, nargs="+", default=[8, 16])
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PottsAdmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
