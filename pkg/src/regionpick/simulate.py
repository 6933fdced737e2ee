"""Closed-loop active-learning simulation at desk scale.

A nearest-prototype classifier over handcrafted point features stands in
for the segmentation network: it is refit from scratch each round on the
labeled pool and produces genuinely uncertainty-bearing softmax rows, so
every selection code path is exercised in seconds.

The loop follows the usual protocol: label a few whole scans up front
(x_init of the corpus), then for each round fit, predict, score with the
configured strategy, select under the point budget, and acquire ground
truth.  Each round is reported with labeled share, per-class IoU, mIoU,
and the class distribution of the newly acquired points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .diversity import PenaltyParams, RegionFeatureSet, diversity_adjusted_rows, pool_region_features
from .geometry import DEFAULT_K, SpatialIndex, color_discontinuity_points, surface_variation_points
from .metrics import class_distribution_ratio, compute_iou
from .scoring import (
    RegionInfoWeights,
    ScoreTable,
    combine_information,
    region_color_discontinuity,
    region_entropy,
    region_structural_complexity,
)
from .segmentation import SegmentationParams, segment
from .selection import (
    Budget,
    acquire_labels,
    acquire_scans,
    coreset_select,
    scan_acquisition_order,
    score_scans,
    select_regions,
)
from .scenes import CLASS_NAMES
from .types import (
    UNLABELED,
    DatasetState,
    LabelMask,
    PointCloud,
    PredictionSet,
    RegionMap,
    ValidationError,
)

STRATEGIES = ("redal", "rand", "conf", "mar", "ent", "segent", "coreset")

N_POINT_FEATURES = 8


@dataclass
class LoopConfig:
    x_init: float = 0.03
    rounds: int = 7
    x_active: float = 0.02
    strategy: str = "redal"
    seed: int = 0
    weights: RegionInfoWeights = field(default_factory=RegionInfoWeights)
    knn_k: int = DEFAULT_K
    clusters: int = 400
    eta: float = 0.95
    tau: float = 4.0
    kmeans_iters: int = 100
    normalize_features: bool = False
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    class_names: Sequence[str] = CLASS_NAMES

    def __post_init__(self):
        if not (0.0 < self.x_init < 1.0):
            raise ValidationError(f"x_init must be in (0, 1), got {self.x_init}")
        if not (0.0 < self.x_active < 1.0):
            raise ValidationError(f"x_active must be in (0, 1), got {self.x_active}")
        # The loop also accepts rounds = 0 (report the initial state only).
        if self.rounds < 0:
            raise ValidationError("rounds must be >= 0")
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.strategy!r}")
        if self.tau <= 0.0:
            raise ValidationError("tau must be positive")


@dataclass
class ScanBundle:
    """Prediction-independent per-scan data, computed once per corpus."""

    cloud: PointCloud
    truth: np.ndarray
    regions: RegionMap
    features: np.ndarray        # (N, 8) handcrafted point features
    region_color: np.ndarray    # per-region color discontinuity mean
    region_struct: np.ndarray   # per-region surface variation mean


def point_features(cloud: PointCloud, surf_var: np.ndarray,
                   mean_knn_dist: np.ndarray) -> np.ndarray:
    """Handcrafted 8-dim feature rows: z, RGB, surface variation, local
    density (inverse neighbor spacing), xy radius from the scan center, and
    intensity (luminance when no separate channel exists)."""
    n = cloud.n
    pos = cloud.positions.astype(np.float64)
    if cloud.colors is not None:
        rgb = cloud.colors.astype(np.float64)
    else:
        rgb = np.zeros((n, 3))
    if cloud.intensity is not None:
        intensity = cloud.intensity.astype(np.float64)
    else:
        intensity = rgb.mean(axis=1)
    density = np.clip(1.0 / (np.asarray(mean_knn_dist, dtype=np.float64) + 1e-3), 0.0, 50.0)
    center = pos[:, :2].mean(axis=0)
    xy_radius = np.sqrt(((pos[:, :2] - center) ** 2).sum(axis=1))
    feats = np.column_stack([
        pos[:, 2], rgb[:, 0], rgb[:, 1], rgb[:, 2],
        np.asarray(surf_var, dtype=np.float64), density, xy_radius, intensity,
    ])
    return feats.astype(np.float32)


def prepare_scan(cloud: PointCloud, truth: LabelMask, cfg: LoopConfig) -> ScanBundle:
    """Segment one scan and compute all prediction-independent descriptors."""
    if truth.n != cloud.n:
        raise ValidationError("truth mask does not match scan size")
    if np.any(truth.labels == UNLABELED):
        raise ValidationError("ground truth must label every point")
    index = SpatialIndex(cloud.positions)
    k = min(cfg.knn_k, max(cloud.n - 1, 1))
    idx = index.knn_all(k)
    surf_var = (surface_variation_points(cloud, index, k, knn=idx) if k >= 3
                else np.zeros(cloud.n))
    pos = cloud.positions.astype(np.float64)
    if idx.shape[1] > 0:
        mean_dist = np.sqrt(((pos[idx] - pos[:, None, :]) ** 2).sum(axis=2)).mean(axis=1)
    else:
        mean_dist = np.full(cloud.n, 1.0)
    regions = segment(cloud, cfg.segmentation)
    if cloud.colors is not None:
        cd_points = color_discontinuity_points(cloud, index, k, knn=idx)
        region_color = region_color_discontinuity(cd_points, regions)
    else:
        region_color = np.zeros(regions.n_regions)
    region_struct = region_structural_complexity(surf_var, regions)
    feats = point_features(cloud, surf_var, mean_dist)
    return ScanBundle(cloud, truth.labels.copy(), regions, feats,
                      region_color, region_struct)


@dataclass
class PrototypePredictor:
    """Nearest-prototype classifier: softmax over negative squared feature
    distances; classes without labeled points fall back to uniform mass."""

    prototypes: np.ndarray   # (C, F) rows; untrained rows are zero
    trained: np.ndarray      # (C,) bool
    tau: float

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValidationError("tau must be positive")
        if not np.any(self.trained):
            raise ValidationError("predictor has no trained class")


def fit_predictor(state: DatasetState, clouds: Mapping[str, PointCloud],
                  descriptors: Mapping[str, np.ndarray], n_classes: int,
                  tau: float) -> PrototypePredictor:
    """Class prototypes = mean handcrafted feature of labeled points."""
    sums = np.zeros((n_classes, N_POINT_FEATURES))
    counts = np.zeros(n_classes, dtype=np.int64)
    for scan_id in sorted(state.scans):
        mask = state.scans[scan_id].mask.labels
        labeled = mask != UNLABELED
        if not np.any(labeled):
            continue
        feats = np.asarray(descriptors[scan_id], dtype=np.float64)
        lab = mask[labeled].astype(np.int64)
        np.add.at(sums, lab, feats[labeled])
        counts += np.bincount(lab, minlength=n_classes)
    if counts.sum() == 0:
        raise ValidationError("cannot fit a predictor with zero labeled points")
    trained = counts > 0
    prototypes = np.zeros_like(sums)
    prototypes[trained] = sums[trained] / counts[trained, None]
    return PrototypePredictor(prototypes, trained, tau)


def predict(predictor: PrototypePredictor, cloud: PointCloud,
            descriptors: np.ndarray) -> PredictionSet:
    feats = np.asarray(descriptors, dtype=np.float64)
    if feats.shape[0] != cloud.n:
        raise ValidationError("descriptor rows do not match scan size")
    n_classes = predictor.prototypes.shape[0]
    trained_idx = np.nonzero(predictor.trained)[0]
    d2 = ((feats[:, None, :] - predictor.prototypes[trained_idx][None, :, :]) ** 2).sum(axis=2)
    logits = -d2 / predictor.tau
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    soft = expl / expl.sum(axis=1, keepdims=True)
    n_untrained = n_classes - trained_idx.shape[0]
    probs = np.zeros((cloud.n, n_classes))
    if n_untrained == 0:
        probs[:, trained_idx] = soft
    else:
        untrained_mass = n_untrained / n_classes
        probs[:, trained_idx] = soft * (1.0 - untrained_mass)
        probs[:, ~predictor.trained] = 1.0 / n_classes
    return PredictionSet(probs=probs.astype(np.float32),
                         features=np.asarray(descriptors, dtype=np.float32),
                         scan_id=cloud.scan_id)


@dataclass
class RoundReport:
    round: int
    labeled_points: int
    total_points: int
    labeled_pct: float
    iou: np.ndarray
    miou: float
    new_permille: np.ndarray
    class_names: Sequence[str]


def format_reports(reports: Sequence[RoundReport]) -> str:
    records = []
    for r in reports:
        lines = [
            f"round={r.round}",
            f"labeled_points={r.labeled_points}",
            f"total_points={r.total_points}",
            f"labeled_pct={r.labeled_pct!r}",
            f"miou={r.miou!r}",
        ]
        for name, v in zip(r.class_names, r.iou.tolist()):
            lines.append(f"iou_{name}={v!r}")
        for name, v in zip(r.class_names, r.new_permille.tolist()):
            lines.append(f"dist_{name}={v!r}")
        records.append("\n".join(lines))
    return "\n\n".join(records) + "\n"


def parse_reports(text: str, class_names: Sequence[str] = CLASS_NAMES) -> list[RoundReport]:
    reports = []
    for block in text.strip().split("\n\n"):
        kv = {}
        for line in block.splitlines():
            key, _, value = line.partition("=")
            kv[key] = value
        iou = np.asarray([float(kv[f"iou_{n}"]) for n in class_names])
        dist = np.asarray([float(kv[f"dist_{n}"]) for n in class_names])
        reports.append(RoundReport(
            round=int(kv["round"]),
            labeled_points=int(kv["labeled_points"]),
            total_points=int(kv["total_points"]),
            labeled_pct=float(kv["labeled_pct"]),
            iou=iou,
            miou=float(kv["miou"]),
            new_permille=dist,
            class_names=tuple(class_names),
        ))
    return reports


def save_reports(reports: Sequence[RoundReport], path) -> None:
    Path(path).write_text(format_reports(reports), encoding="utf-8")


def prepare_scenes(scenes, cfg: LoopConfig) -> dict[str, ScanBundle]:
    """Bundle every (cloud, truth) pair keyed by scan id."""
    bundles = {}
    for cloud, truth in scenes:
        if cloud.scan_id in bundles:
            raise ValidationError(f"duplicate scan id {cloud.scan_id!r}")
        bundles[cloud.scan_id] = prepare_scan(cloud, truth, cfg)
    return bundles


def _initial_scans(bundles: Mapping[str, ScanBundle], cfg: LoopConfig,
                   init_budget: int) -> list[str]:
    ids = sorted(bundles)
    rng = np.random.default_rng(cfg.seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    picked = []
    cumulative = 0
    for sid in order:
        if cumulative >= init_budget:
            break
        picked.append(sid)
        cumulative += bundles[sid].cloud.n
    return picked


def _score_candidate_regions(bundles, preds, state, cfg: LoopConfig):
    """Build the sorted candidate score table plus pooled region features."""
    table = ScoreTable()
    feat_rows = []
    keys = []
    for sid in sorted(bundles):
        if state.scan_is_fully_labeled(sid):
            continue
        bundle = bundles[sid]
        h = region_entropy(preds[sid], bundle.regions)
        scan_table = combine_information(
            h, bundle.region_color, bundle.region_struct, cfg.weights,
            scan_id=sid, point_counts=bundle.regions.sizes())
        pooled = pool_region_features(preds[sid], bundle.regions)
        for row in scan_table.rows:
            if state.is_region_labeled(sid, row.region_id):
                continue
            table.rows.append(row)
            feat_rows.append(pooled[row.region_id])
            keys.append((sid, row.region_id))
    table.sort()
    order = {k: i for i, k in enumerate(keys)}
    feats = np.stack(feat_rows) if feat_rows else np.zeros((0, N_POINT_FEATURES))
    aligned = np.stack([feats[order[(r.scan_id, r.region_id)]] for r in table.rows]) \
        if table.rows else feats
    features = RegionFeatureSet(aligned, [(r.scan_id, r.region_id) for r in table.rows])
    return table, features


def _acquire_round(bundles, preds, state, cfg: LoopConfig, budget_points: int,
                   round_index: int, oracle) -> int:
    """Run one strategy round; returns the number of points acquired."""
    if cfg.strategy == "redal":
        table, features = _score_candidate_regions(bundles, preds, state, cfg)
        if not table.rows:
            return 0
        rows, _ = diversity_adjusted_rows(
            table, features, PenaltyParams(eta=cfg.eta, clusters=cfg.clusters),
            seed=cfg.seed + round_index, kmeans_iters=cfg.kmeans_iters,
            normalize_features=cfg.normalize_features)
        batch = select_regions(rows, state, Budget(budget_points))
        acquire_labels(batch, oracle, state)
        return batch.total_points

    candidates = [sid for sid in sorted(bundles) if not state.scan_is_fully_labeled(sid)]
    if not candidates:
        return 0
    remaining = {sid: bundles[sid].cloud.n - state.scans[sid].mask.labeled_count()
                 for sid in candidates}
    if cfg.strategy == "coreset":
        scan_feats = {sid: bundles[sid].features.astype(np.float64).mean(axis=0)
                      for sid in bundles}
        labeled_ids = [sid for sid in sorted(bundles) if state.scan_is_fully_labeled(sid)]
        order = coreset_select(scan_feats, labeled_ids, len(candidates))
    else:
        scores = score_scans({sid: preds[sid] for sid in candidates},
                             {sid: bundles[sid].regions for sid in candidates},
                             cfg.strategy.upper(),
                             seed=np.random.default_rng([cfg.seed, round_index]).integers(2**31))
        order = scan_acquisition_order(scores, cfg.strategy.upper())
    picked = []
    cumulative = 0
    for sid in order:
        if cumulative >= budget_points:
            break
        picked.append(sid)
        cumulative += remaining[sid]
    return acquire_scans(picked, oracle, state)


def run_active_loop(cfg: LoopConfig, scenes=None,
                    bundles: Optional[Mapping[str, ScanBundle]] = None) -> list[RoundReport]:
    """Run the full protocol and report every round, the initial state first.

    Accepts raw (cloud, truth) pairs or pre-built bundles; bundles are
    reused across strategy runs since they are prediction-independent.
    """
    if bundles is None:
        if scenes is None:
            raise ValidationError("run_active_loop needs scenes or bundles")
        bundles = prepare_scenes(scenes, cfg)
    if not bundles:
        raise ValidationError("no scans to run on")
    n_classes = len(cfg.class_names)
    oracle = {sid: b.truth for sid, b in bundles.items()}
    total = sum(b.cloud.n for b in bundles.values())

    state = DatasetState(rng_seed=cfg.seed)
    for sid in sorted(bundles):
        state.add_scan(sid, bundles[sid].regions)
    init_budget = int(round(cfg.x_init * total))
    init_scans = _initial_scans(bundles, cfg, init_budget)
    delta_labels = []
    for sid in init_scans:
        acquire_scans([sid], oracle, state)
        delta_labels.append(bundles[sid].truth)
    new_labels = np.concatenate(delta_labels) if delta_labels else np.zeros(0, dtype=np.uint8)

    budget_points = int(round(cfg.x_active * total))
    truth_all = np.concatenate([bundles[sid].truth for sid in sorted(bundles)])
    reports: list[RoundReport] = []
    for k in range(cfg.rounds + 1):
        predictor = fit_predictor(state, {sid: b.cloud for sid, b in bundles.items()},
                                  {sid: b.features for sid, b in bundles.items()},
                                  n_classes, cfg.tau)
        preds = {sid: predict(predictor, bundles[sid].cloud, bundles[sid].features)
                 for sid in sorted(bundles)}
        pred_all = np.concatenate([np.argmax(preds[sid].probs, axis=1)
                                   for sid in sorted(bundles)])
        iou, miou = compute_iou(pred_all, truth_all, n_classes)
        permille = (class_distribution_ratio(new_labels, n_classes)
                    if new_labels.size else np.zeros(n_classes))
        labeled = state.labeled_points()
        reports.append(RoundReport(
            round=k, labeled_points=labeled, total_points=total,
            labeled_pct=100.0 * labeled / total, iou=iou, miou=miou,
            new_permille=permille, class_names=tuple(cfg.class_names)))
        if k == cfg.rounds:
            break
        before = {sid: state.scans[sid].mask.labels.copy() for sid in bundles}
        acquired = _acquire_round(bundles, preds, state, cfg, budget_points, k, oracle)
        if acquired == 0:
            break  # unlabeled pool exhausted; truncated report
        parts = []
        for sid in sorted(bundles):
            after = state.scans[sid].mask.labels
            fresh = (before[sid] == UNLABELED) & (after != UNLABELED)
            if np.any(fresh):
                parts.append(after[fresh])
        new_labels = np.concatenate(parts)
        state.round_index += 1
        state.check_consistency()
    return reports
