"""Command-line surface: segment, score, select, and simulate.

Every command is a pure function of its flags, input files, and seed, so
reruns produce byte-identical outputs.  Exit codes: 0 success, 1 I/O
failure, 2 validation failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diversity import PenaltyParams, RegionFeatureSet, diversity_adjusted_rows
from .formats import load_features, load_probabilities, load_regions, load_scan, save_regions
from .geometry import SpatialIndex, color_discontinuity_points, surface_variation_points
from .scenes import benchmark_specs, generate_scene
from .scoring import (
    RegionInfoWeights,
    ScoreTable,
    adjusted_to_tsv,
    combine_information,
    region_color_discontinuity,
    region_entropy,
    region_structural_complexity,
)
from .segmentation import SegmentationParams, segment
from .selection import Budget, SelectionBatch, select_regions
from .simulate import STRATEGIES, LoopConfig, run_active_loop, save_reports
from .types import DatasetState, PredictionSet, RegionMap, ValidationError, validate_predictions

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2

_CONFIG_KEYS = {
    "scenes": int,
    "scene_seed": int,
    "x_init": float,
    "x_active": float,
    "rounds": int,
    "strategy": str,
    "seed": int,
    "alpha": float,
    "beta": float,
    "gamma": float,
    "k": int,
    "clusters": int,
    "decay": float,
    "tau": float,
    "kmeans_iters": int,
    "normalize_features": bool,
    "r_seed": float,
    "r_voxel": float,
    "w_spatial": float,
    "w_color": float,
    "min_region_points": int,
    "max_iters": int,
}

_CONFIG_DEFAULTS = {
    "scenes": 20,
    "scene_seed": 7,
    "x_init": 0.03,
    "x_active": 0.02,
    "rounds": 7,
    "strategy": "redal",
    "seed": 0,
    "alpha": 1.0,
    "beta": 0.1,
    "gamma": 0.05,
    "k": 50,
    "clusters": 400,
    "decay": 0.95,
    "tau": 4.0,
    "kmeans_iters": 100,
    "normalize_features": False,
    "r_seed": 1.0,
    "r_voxel": 0.1,
    "w_spatial": 1.0,
    "w_color": 0.5,
    "min_region_points": 10,
    "max_iters": 5,
}


def parse_config_file(path) -> dict:
    """Parse `key = value` lines; `#` starts a comment; unknown keys fail."""
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
        typ = _CONFIG_KEYS[key]
        try:
            if typ is bool:
                if value.lower() not in ("true", "false", "0", "1"):
                    raise ValueError
                out[key] = value.lower() in ("true", "1")
            else:
                out[key] = typ(value)
        except ValueError:
            raise ValidationError(
                f"{path}:{lineno}: cannot parse {value!r} as {typ.__name__}") from None
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regionpick",
        description="Region-based, diversity-aware active-learning selection "
                    "for 3D point cloud segmentation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="over-segment a scan into sub-scene regions")
    seg.add_argument("--input", required=True, help="scan file")
    seg.add_argument("--format", default="kitti_bin", choices=["kitti_bin", "ascii_xyzrgb"])
    seg.add_argument("--r-seed", type=float, default=1.0,
                     help="seed grid spacing in meters (indoor default 1.0, outdoor 10)")
    seg.add_argument("--r-voxel", type=float, default=0.1,
                     help="voxel resolution in meters (indoor default 0.1, outdoor 0.5)")
    seg.add_argument("--w-spatial", type=float, default=1.0, help="spatial distance weight")
    seg.add_argument("--w-color", type=float, default=0.5, help="color distance weight")
    seg.add_argument("--min-region-points", type=int, default=10,
                     help="regions smaller than this merge into a neighbor")
    seg.add_argument("--max-iters", type=int, default=5, help="growth/update rounds")
    seg.add_argument("--seed", type=int, default=0, help="rng seed")
    seg.add_argument("--out", required=True, help="output region container")

    sco = sub.add_parser("score", help="score a scan's regions by information content")
    sco.add_argument("--scan", required=True, help="scan file")
    sco.add_argument("--format", default="kitti_bin", choices=["kitti_bin", "ascii_xyzrgb"])
    sco.add_argument("--regions", required=True, help="region container for the scan")
    sco.add_argument("--probs", required=True, help="probability container for the scan")
    sco.add_argument("--alpha", type=float, default=1.0, help="entropy weight (default 1)")
    sco.add_argument("--beta", type=float, default=0.1,
                     help="color discontinuity weight (default 0.1; forced to 0 "
                          "when the scan has no colors)")
    sco.add_argument("--gamma", type=float, default=0.05,
                     help="structural complexity weight (default 0.05)")
    sco.add_argument("--k", type=int, default=50,
                     help="neighborhood size for both descriptors (default 50)")
    sco.add_argument("--out", required=True, help="output score table TSV")

    sel = sub.add_parser("select", help="build a budgeted, diversity-aware batch")
    sel.add_argument("--scores", required=True, help="score table TSV")
    sel.add_argument("--features", required=True,
                     help="region feature container, rows aligned with the score table")
    sel.add_argument("--clusters", type=int, default=400,
                     help="k-means cluster count (indoor default 400, outdoor 150)")
    sel.add_argument("--decay", type=float, default=0.95,
                     help="importance decay rate per same-cluster pick (default 0.95)")
    sel.add_argument("--budget", type=int, required=True, help="point budget for the batch")
    sel.add_argument("--seed", type=int, default=0, help="rng seed")
    sel.add_argument("--normalize-features", action="store_true",
                     help="L2-normalize region features before clustering")
    sel.add_argument("--adjusted-out", help="optional adjusted score table TSV")
    sel.add_argument("--out", required=True, help="output selection batch TSV")

    sim = sub.add_parser("simulate", help="run the closed-loop benchmark")
    sim.add_argument("--config", help="config file of 'key = value' lines")
    sim.add_argument("--strategy", choices=list(STRATEGIES), help="selection strategy")
    sim.add_argument("--rounds", type=int, help="active selection rounds")
    sim.add_argument("--seed", type=int, help="rng seed")
    sim.add_argument("--scenes", type=int, help="number of synthetic scenes")
    sim.add_argument("--out", required=True, help="output round report")
    return parser


def _cmd_segment(args) -> int:
    params = SegmentationParams(
        r_seed=args.r_seed, r_voxel=args.r_voxel, w_spatial=args.w_spatial,
        w_color=args.w_color, min_region_points=args.min_region_points,
        max_iters=args.max_iters)
    cloud = load_scan(args.input, args.format)
    regions = segment(cloud, params, seed=args.seed)
    save_regions(args.out, regions.region_of)
    print(f"segment: {cloud.n} points -> {regions.n_regions} regions -> {args.out}")
    return EXIT_OK


def _cmd_score(args) -> int:
    cloud = load_scan(args.scan, args.format)
    regions = RegionMap(load_regions(args.regions), scan_id=cloud.scan_id)
    if regions.n_points != cloud.n:
        raise ValidationError(
            f"region map covers {regions.n_points} points but scan has {cloud.n}")
    pred = PredictionSet(load_probabilities(args.probs), scan_id=cloud.scan_id)
    validate_predictions(pred, cloud)
    beta = args.beta
    if cloud.colors is None and beta != 0.0:
        print("warning: scan has no colors, forcing beta = 0", file=sys.stderr)
        beta = 0.0
    weights = RegionInfoWeights(alpha=args.alpha, beta=beta, gamma=args.gamma)
    index = SpatialIndex(cloud.positions)
    k = min(args.k, max(cloud.n - 1, 1))
    h = region_entropy(pred, regions)
    if cloud.colors is not None and beta != 0.0:
        c = region_color_discontinuity(color_discontinuity_points(cloud, index, k), regions)
    else:
        c = np.zeros(regions.n_regions)
    if k >= 3:
        s = region_structural_complexity(surface_variation_points(cloud, index, k), regions)
    else:
        s = np.zeros(regions.n_regions)
    table = combine_information(h, c, s, weights, scan_id=cloud.scan_id,
                                point_counts=regions.sizes()).sort()
    table.save(args.out)
    print(f"score: {regions.n_regions} regions -> {args.out}")
    return EXIT_OK


def _cmd_select(args) -> int:
    table = ScoreTable.load(args.scores)
    feats = load_features(args.features)
    if feats.shape[0] != len(table):
        raise ValidationError(
            f"feature rows ({feats.shape[0]}) do not match score rows ({len(table)})")
    if args.budget < 0:
        raise ValidationError("--budget must be >= 0")
    keys = [(r.scan_id, r.region_id) for r in table.rows]
    features = RegionFeatureSet(feats.astype(np.float64), keys)
    params = PenaltyParams(eta=args.decay, clusters=min(args.clusters, max(len(table), 1)))
    rows, _ = diversity_adjusted_rows(table, features, params, seed=args.seed,
                                      normalize_features=args.normalize_features)
    if args.adjusted_out:
        Path(args.adjusted_out).write_text(adjusted_to_tsv(rows), encoding="utf-8")
    # File-driven selection has no pool state; validate against an empty one.
    batch = select_regions(rows, DatasetState(), Budget(args.budget))
    batch.save(args.out)
    if batch.warning:
        print(f"warning: {batch.warning}", file=sys.stderr)
    print(f"select: {len(batch.entries)} regions, {batch.total_points} points -> {args.out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg_values = dict(_CONFIG_DEFAULTS)
    if args.config:
        cfg_values.update(parse_config_file(args.config))
    for key in ("strategy", "rounds", "seed", "scenes"):
        value = getattr(args, key)
        if value is not None:
            cfg_values[key] = value
    cfg = LoopConfig(
        x_init=cfg_values["x_init"],
        rounds=cfg_values["rounds"],
        x_active=cfg_values["x_active"],
        strategy=cfg_values["strategy"],
        seed=cfg_values["seed"],
        weights=RegionInfoWeights(cfg_values["alpha"], cfg_values["beta"], cfg_values["gamma"]),
        knn_k=cfg_values["k"],
        clusters=cfg_values["clusters"],
        eta=cfg_values["decay"],
        tau=cfg_values["tau"],
        kmeans_iters=cfg_values["kmeans_iters"],
        normalize_features=cfg_values["normalize_features"],
        segmentation=SegmentationParams(
            r_seed=cfg_values["r_seed"], r_voxel=cfg_values["r_voxel"],
            w_spatial=cfg_values["w_spatial"], w_color=cfg_values["w_color"],
            min_region_points=cfg_values["min_region_points"],
            max_iters=cfg_values["max_iters"]),
    )
    scenes = [generate_scene(spec)
              for spec in benchmark_specs(cfg_values["scenes"], cfg_values["scene_seed"])]
    reports = run_active_loop(cfg, scenes)
    save_reports(reports, args.out)
    final = reports[-1]
    print(f"simulate: strategy={cfg.strategy} rounds={len(reports) - 1} "
          f"final_mIoU={final.miou:.4f} labeled={final.labeled_pct:.2f}% -> {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "segment": _cmd_segment,
        "score": _cmd_score,
        "select": _cmd_select,
        "simulate": _cmd_simulate,
    }
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
