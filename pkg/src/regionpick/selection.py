"""Budgeted label acquisition, pool transitions, and scan-level baselines.

Region selection walks the penalized score ranking and keeps taking regions
while the running point total is below the round budget; the region that
crosses the budget is still included (exhaustion semantics), so each round
overshoots by strictly less than one region.

Scan-level baselines score whole scans (random, confidence, margin,
entropy, segment entropy, or greedy k-center) and acquire entire scans
under the same budget-crossing rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .formats import save_labels, save_regions, load_labels, load_regions
from .scoring import AdjustedRow, point_entropy
from .types import (
    UNLABELED,
    DatasetState,
    LabelMask,
    PredictionSet,
    RegionMap,
    ValidationError,
)

SCAN_STRATEGIES = ("RAND", "CONF", "MAR", "ENT", "SEGENT")

BATCH_HEADER = "scan_id\tregion_id\tpoints\tphi_star"


@dataclass
class Budget:
    points_per_round: int
    consumed: int = 0

    def __post_init__(self):
        if self.points_per_round < 0 or self.consumed < 0:
            raise ValidationError("budget counts must be non-negative")


@dataclass
class SelectionBatch:
    """Ordered querying batch; total_points always matches the entries."""

    entries: list[tuple[str, int, int, float]] = field(default_factory=list)
    total_points: int = 0
    warning: Optional[str] = None

    def to_tsv(self) -> str:
        lines = [BATCH_HEADER]
        for scan_id, region_id, points, phi_star in self.entries:
            lines.append(f"{scan_id}\t{region_id}\t{points}\t{phi_star!r}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")

    @classmethod
    def from_tsv(cls, text: str) -> "SelectionBatch":
        lines = text.splitlines()
        if not lines or lines[0] != BATCH_HEADER:
            raise ValidationError("bad selection batch header")
        entries = []
        for ln in lines[1:]:
            if not ln:
                continue
            f = ln.split("\t")
            if len(f) != 4:
                raise ValidationError("bad selection batch row")
            entries.append((f[0], int(f[1]), int(f[2]), float(f[3])))
        return cls(entries, sum(e[2] for e in entries))


def select_regions(rows: list[AdjustedRow], state: DatasetState, budget: Budget) -> SelectionBatch:
    """Take a prefix of the phi_star ranking under the point budget.

    Rows must already be sorted by descending phi_star and must not contain
    labeled regions.  A region is included iff the cumulative point count
    before it is below the budget; selection stops once the budget is
    reached or crossed.
    """
    batch = SelectionBatch()
    seen = set()
    cumulative = 0
    for r in rows:
        key = (r.scan_id, r.region_id)
        if key in seen:
            raise ValidationError(f"duplicate candidate region {key}")
        seen.add(key)
        if state.is_region_labeled(r.scan_id, r.region_id):
            raise ValidationError(f"candidate region {key} is already labeled")
        if cumulative >= budget.points_per_round:
            break
        batch.entries.append((r.scan_id, r.region_id, r.points, r.phi_star))
        cumulative += r.points
    batch.total_points = cumulative
    budget.consumed = cumulative
    if not rows and budget.points_per_round > 0:
        batch.warning = "no candidate regions available for a positive budget"
    return batch


def acquire_labels(batch: SelectionBatch, oracle: Mapping[str, np.ndarray],
                   state: DatasetState) -> DatasetState:
    """Flip the batch regions to their ground-truth classes and move them to D_L."""
    added = 0
    for scan_id, region_id, points, _ in batch.entries:
        if scan_id not in oracle:
            raise ValidationError(f"oracle has no labels for scan {scan_id!r}")
        truth = np.asarray(oracle[scan_id])
        pts = state.scans[scan_id].regions.regions[region_id]
        added += state.label_region(scan_id, region_id, truth[pts])
    if added != batch.total_points:
        raise ValidationError(
            f"acquisition added {added} points but the batch declared {batch.total_points}"
        )
    return state


def acquire_scans(scan_ids, oracle: Mapping[str, np.ndarray], state: DatasetState) -> int:
    """Label every remaining region of the given scans; returns points added."""
    added = 0
    for scan_id in scan_ids:
        if scan_id not in oracle:
            raise ValidationError(f"oracle has no labels for scan {scan_id!r}")
        truth = np.asarray(oracle[scan_id])
        entry = state.scans[scan_id]
        for rid, pts in enumerate(entry.regions.regions):
            if not state.is_region_labeled(scan_id, rid):
                added += state.label_region(scan_id, rid, truth[pts])
    return added


def score_scans(preds: Mapping[str, PredictionSet],
                regions: Optional[Mapping[str, RegionMap]],
                strategy: str, seed: int = 0) -> dict[str, float]:
    """Per-scan acquisition scores for the scan-level baseline strategies.

    CONF: mean max-class probability (acquire ascending).
    MAR:  mean margin between the two most likely classes (ascending).
    ENT:  mean point entropy (descending).
    SEGENT: mean over regions of the entropy of the predicted-label
            histogram (descending); needs region maps.
    RAND: seeded uniform scores (descending).
    """
    if strategy not in SCAN_STRATEGIES:
        raise ValidationError(f"unknown strategy {strategy!r}")
    scan_ids = sorted(preds)
    scores: dict[str, float] = {}
    if strategy == "RAND":
        rng = np.random.default_rng(seed)
        for sid in scan_ids:
            scores[sid] = float(rng.random())
        return scores
    for sid in scan_ids:
        p = preds[sid].probs.astype(np.float64)
        if strategy == "CONF":
            scores[sid] = float(p.max(axis=1).mean())
        elif strategy == "MAR":
            part = np.sort(p, axis=1)
            scores[sid] = float((part[:, -1] - part[:, -2]).mean())
        elif strategy == "ENT":
            scores[sid] = float(point_entropy(p).mean())
        else:  # SEGENT
            if regions is None or sid not in regions:
                raise ValidationError("SEGENT needs a region map per scan")
            rmap = regions[sid]
            pred_labels = np.argmax(p, axis=1)
            c = p.shape[1]
            vals = []
            for pts in rmap.regions:
                hist = np.bincount(pred_labels[pts], minlength=c).astype(np.float64)
                q = hist / hist.sum()
                nz = q[q > 0.0]
                vals.append(float(-(nz * np.log(nz)).sum()))
            scores[sid] = float(np.mean(vals))
    return scores


def scan_acquisition_order(scores: Mapping[str, float], strategy: str) -> list[str]:
    """Scan ids ranked most-wanted first; ties broken by scan id."""
    if strategy not in SCAN_STRATEGIES:
        raise ValidationError(f"unknown strategy {strategy!r}")
    ascending = strategy in ("CONF", "MAR")
    sign = 1.0 if ascending else -1.0
    return sorted(scores, key=lambda sid: (sign * scores[sid], sid))


def coreset_select(scan_features: Mapping[str, np.ndarray], labeled_ids,
                   budget_scans: int) -> list[str]:
    """Greedy k-center over pooled scan features.

    Repeatedly picks the unlabeled scan farthest (by min distance) from the
    labeled set plus everything already picked; distance ties fall to the
    lower scan id.
    """
    labeled = sorted(set(labeled_ids))
    if not labeled:
        raise ValidationError("core-set selection needs at least one labeled scan")
    for sid in labeled:
        if sid not in scan_features:
            raise ValidationError(f"no features for labeled scan {sid!r}")
    unlabeled = sorted(sid for sid in scan_features if sid not in set(labeled))
    if budget_scans <= 0 or not unlabeled:
        return []
    feats = np.stack([np.asarray(scan_features[sid], dtype=np.float64).reshape(-1)
                      for sid in unlabeled])
    min_d = np.full(len(unlabeled), np.inf)
    for sid in labeled:
        ref = np.asarray(scan_features[sid], dtype=np.float64).reshape(-1)
        min_d = np.minimum(min_d, np.sqrt(((feats - ref) ** 2).sum(axis=1)))
    picked: list[str] = []
    available = np.ones(len(unlabeled), dtype=bool)
    for _ in range(min(budget_scans, len(unlabeled))):
        masked = np.where(available, min_d, -np.inf)
        j = int(np.argmax(masked))  # first max = lowest scan id on ties
        picked.append(unlabeled[j])
        available[j] = False
        ref = feats[j]
        min_d = np.minimum(min_d, np.sqrt(((feats - ref) ** 2).sum(axis=1)))
    return picked


def save_state(state: DatasetState, directory) -> None:
    """Snapshot: one label and one region container per scan plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"round_index = {state.round_index}", f"rng_seed = {state.rng_seed}"]
    for scan_id in sorted(state.scans):
        entry = state.scans[scan_id]
        labels_file = f"{scan_id}.labels.bin"
        regions_file = f"{scan_id}.regions.bin"
        save_labels(directory / labels_file, entry.mask.labels)
        save_regions(directory / regions_file, entry.regions.region_of)
        lines.append(f"scan = {scan_id} {entry.n_points} {labels_file} {regions_file}")
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_state(directory) -> DatasetState:
    directory = Path(directory)
    text = (directory / "manifest.txt").read_text(encoding="utf-8")
    state = DatasetState()
    for ln in text.splitlines():
        if not ln.strip():
            continue
        key, _, value = ln.partition(" = ")
        if key == "round_index":
            state.round_index = int(value)
            continue
        if key == "rng_seed":
            state.rng_seed = int(value)
            continue
        if key != "scan":
            raise ValidationError(f"unknown manifest line {ln!r}")
        scan_id, n_points, labels_file, regions_file = value.split(" ")
        labels = load_labels(directory / labels_file)
        region_of = load_regions(directory / regions_file)
        if labels.shape[0] != int(n_points) or region_of.shape[0] != int(n_points):
            raise ValidationError(f"snapshot size mismatch for scan {scan_id!r}")
        mask = LabelMask(labels, scan_id=scan_id)
        state.add_scan(scan_id, RegionMap(region_of, scan_id=scan_id), mask)
    return state
