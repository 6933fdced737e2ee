"""Region feature pooling, clustering, and similar-region penalization.

Visually similar regions are found by k-means over pooled region features.
A single greedy pass then walks the score-ranked region list and scales
each region by its cluster's importance weight, decaying that weight by
eta afterwards, so the j-th appearance of a cluster in rank order is
multiplied by eta^j.  With eta = 1 or all-distinct clusters the pass is the
identity and selection reduces to pure information ranking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formats import save_features, load_features
from .scoring import AdjustedRow, ScoreTable
from .types import PredictionSet, RegionMap, ValidationError


@dataclass(frozen=True)
class PenaltyParams:
    eta: float = 0.95
    clusters: int = 400  # indoor-profile default; 150 suits sparse outdoor scans

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValidationError(f"eta must be in (0, 1], got {self.eta}")
        if self.clusters < 1:
            raise ValidationError("cluster count must be >= 1")


@dataclass
class RegionFeatureSet:
    """Pooled region feature rows plus their (scan_id, region_id) keys."""

    features: np.ndarray
    keys: list[tuple[str, int]] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValidationError("region features must be a 2-D matrix")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("region features contain non-finite values")
        if self.keys and len(self.keys) != self.features.shape[0]:
            raise ValidationError("feature keys do not match row count")


@dataclass
class ClusterModel:
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    inertia_history: list[float] = field(default_factory=list)


def pool_region_features(pred: PredictionSet, regions: RegionMap) -> np.ndarray:
    """Mean point-feature row per region, (R, F)."""
    if pred.features is None:
        raise ValidationError(
            "prediction set has no point features; supply handcrafted features "
            "(the simulator path) before pooling"
        )
    if pred.n != regions.n_points:
        raise ValidationError("prediction rows do not match region map size")
    feats = pred.features.astype(np.float64)
    sums = np.zeros((regions.n_regions, feats.shape[1]))
    np.add.at(sums, regions.region_of, feats)
    return sums / regions.sizes().astype(np.float64)[:, None]


def _assign(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # argmin returns the first minimum, i.e. the lower centroid id on ties.
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _inertia(x: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    return float(((x - centroids[assignment]) ** 2).sum())


def _kmeans_pp_init(x: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for i in range(1, m):
        total = d2.sum()
        if total <= 0.0:
            chosen[i] = rng.integers(n)
        else:
            chosen[i] = rng.choice(n, p=d2 / total)
        d2 = np.minimum(d2, ((x - x[chosen[i]]) ** 2).sum(axis=1))
    return x[chosen].copy()


def kmeans(features, m: int, seed: int = 0, max_iters: int = 100) -> ClusterModel:
    """Deterministic Lloyd k-means with k-means++ seeding.

    Runs until the assignment reaches a fixpoint or max_iters.  Empty
    clusters are repaired by stealing the point farthest from its assigned
    centroid.
    """
    if isinstance(features, RegionFeatureSet):
        x = features.features
    else:
        x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValidationError("kmeans needs a non-empty 2-D feature matrix")
    n = x.shape[0]
    if m < 1:
        raise ValidationError("cluster count must be >= 1")
    if m > n:
        raise ValidationError(f"cluster count {m} exceeds the {n} available regions")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(x, m, rng)
    assignment = _assign(x, centroids)
    history = []
    for _ in range(max_iters):
        # Empty-cluster repair: give each empty cluster the point that is
        # currently farthest from its own centroid.
        d2_own = ((x - centroids[assignment]) ** 2).sum(axis=1)
        for c in range(m):
            if not np.any(assignment == c):
                j = int(np.argmax(d2_own))
                assignment[j] = c
                d2_own[j] = 0.0
        for c in range(m):
            mask = assignment == c
            centroids[c] = x[mask].mean(axis=0)
        new_assignment = _assign(x, centroids)
        history.append(_inertia(x, centroids, new_assignment))
        if np.array_equal(new_assignment, assignment):
            assignment = new_assignment
            break
        assignment = new_assignment
    inertia = _inertia(x, centroids, assignment)
    return ClusterModel(centroids, assignment.astype(np.int32), inertia, history)


def penalize_similar(phi_sorted, labels, params: PenaltyParams) -> np.ndarray:
    """Greedy similar-region penalization over a descending score list.

    phi_star[i] = phi[i] * W[labels[i]], after which W[labels[i]] *= eta.
    All M importance weights start at 1.  Output order matches the input;
    re-ranking happens downstream.
    """
    phi = np.asarray(phi_sorted, dtype=np.float64).reshape(-1)
    lab = np.asarray(labels, dtype=np.int64).reshape(-1)
    if phi.shape != lab.shape:
        raise ValidationError("scores and cluster labels must have equal lengths")
    if phi.size and (lab.min() < 0 or lab.max() >= params.clusters):
        raise ValidationError(
            f"cluster label out of range [0, {params.clusters})"
        )
    weights = [1.0] * params.clusters
    eta = params.eta
    out = np.empty_like(phi)
    for i, (p, c) in enumerate(zip(phi.tolist(), lab.tolist())):
        w = weights[c]
        out[i] = p * w
        weights[c] = w * eta
    return out


def diversity_adjusted_rows(table: ScoreTable, features: RegionFeatureSet,
                            params: PenaltyParams, seed: int = 0,
                            kmeans_iters: int = 100,
                            normalize_features: bool = False):
    """Cluster candidate regions and penalize the sorted table.

    Returns (adjusted rows re-sorted by phi_star, ClusterModel).  The
    feature set must carry one row per table row, keyed by
    (scan_id, region_id).
    """
    if not table.sorted:
        table.sort()
    if len(features.keys) != len(table):
        raise ValidationError("feature rows do not match score table rows")
    by_key = {k: i for i, k in enumerate(features.keys)}
    order = []
    for r in table.rows:
        key = (r.scan_id, r.region_id)
        if key not in by_key:
            raise ValidationError(f"missing region features for {key}")
        order.append(by_key[key])
    x = features.features[order]
    if normalize_features:
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        x = x / np.maximum(norms, 1e-12)
    m = min(params.clusters, x.shape[0])
    model = kmeans(x, m, seed=seed, max_iters=kmeans_iters)
    phi = np.asarray([r.phi for r in table.rows])
    phi_star = penalize_similar(phi, model.assignment,
                                PenaltyParams(eta=params.eta, clusters=m))
    rows = [
        AdjustedRow(r.scan_id, r.region_id, r.points, r.entropy, r.color_disc,
                    r.struct_complexity, r.phi, int(model.assignment[i]),
                    float(phi_star[i]))
        for i, r in enumerate(table.rows)
    ]
    rows.sort(key=lambda r: (-r.phi_star, r.scan_id, r.region_id))
    return rows, model


def save_cluster_model(model: ClusterModel, keys: list[tuple[str, int]],
                       centroids_path, assignment_path) -> None:
    """Persist centroids as a feature container and assignments as TSV."""
    save_features(centroids_path, model.centroids)
    lines = ["scan_id\tregion_id\tcluster"]
    for (scan_id, region_id), c in zip(keys, model.assignment.tolist()):
        lines.append(f"{scan_id}\t{region_id}\t{c}")
    Path(assignment_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_cluster_model(centroids_path, assignment_path):
    """Counterpart of save_cluster_model; returns (model, keys)."""
    centroids = load_features(centroids_path).astype(np.float64)
    text = Path(assignment_path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != "scan_id\tregion_id\tcluster":
        raise ValidationError("bad cluster assignment header")
    keys = []
    assignment = []
    for ln in lines[1:]:
        if not ln:
            continue
        f = ln.split("\t")
        if len(f) != 3:
            raise ValidationError("bad cluster assignment row")
        keys.append((f[0], int(f[1])))
        assignment.append(int(f[2]))
    model = ClusterModel(centroids, np.asarray(assignment, dtype=np.int32), float("nan"))
    return model, keys
