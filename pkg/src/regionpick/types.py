"""Core data model: scans, region partitions, predictions, and label pools."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# Sentinel for an unlabeled point in u8 label payloads.  Caps the usable
# class count at 255.
UNLABELED = 255

ROW_SUM_TOL = 1e-4


class ValidationError(ValueError):
    """A data structure or input violates one of its invariants."""


def _as_float32(a, name: str, ncols: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float32)
    if ncols is not None:
        if arr.ndim != 2 or arr.shape[1] != ncols:
            raise ValidationError(f"{name} must have shape (N, {ncols}), got {arr.shape}")
    return arr


@dataclass
class PointCloud:
    """One scan: per-point positions plus optional color / intensity channels.

    Positions are meters, float32.  Colors are RGB in [0, 1] (raw 0-255
    channels are normalized at load time).  Intensity is a per-point scalar
    in [0, 1].
    """

    positions: np.ndarray
    colors: Optional[np.ndarray] = None
    intensity: Optional[np.ndarray] = None
    scan_id: str = ""

    def __post_init__(self):
        self.positions = _as_float32(self.positions, "positions", 3)
        if self.positions.shape[0] < 1:
            raise ValidationError("positions must be non-empty")
        if not np.all(np.isfinite(self.positions)):
            raise ValidationError("positions contain non-finite values")
        n = self.positions.shape[0]
        if self.colors is not None:
            self.colors = _as_float32(self.colors, "colors", 3)
            if self.colors.shape[0] != n:
                raise ValidationError("colors length does not match positions")
            if not np.all(np.isfinite(self.colors)):
                raise ValidationError("colors contain non-finite values")
            if self.colors.min() < 0.0 or self.colors.max() > 1.0:
                raise ValidationError("colors must lie in [0, 1]")
        if self.intensity is not None:
            self.intensity = np.asarray(self.intensity, dtype=np.float32).reshape(-1)
            if self.intensity.shape[0] != n:
                raise ValidationError("intensity length does not match positions")
            if not np.all(np.isfinite(self.intensity)):
                raise ValidationError("intensity contains non-finite values")
            if self.intensity.min() < 0.0 or self.intensity.max() > 1.0:
                raise ValidationError("intensity must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def has_colors(self) -> bool:
        return self.colors is not None


class RegionMap:
    """Partition of a scan's points into dense regions 0..R-1.

    `region_of` maps every point to exactly one region; `regions` is the
    inverse index (list of point-index arrays).  Construction validates the
    partition property.
    """

    def __init__(self, region_of, scan_id: str = ""):
        region_of = np.asarray(region_of, dtype=np.int32).reshape(-1)
        if region_of.size == 0:
            raise ValidationError("region_of must be non-empty")
        if region_of.min() < 0:
            raise ValidationError("negative region index")
        r = int(region_of.max()) + 1
        counts = np.bincount(region_of, minlength=r)
        if np.any(counts == 0):
            missing = int(np.nonzero(counts == 0)[0][0])
            raise ValidationError(f"region indices not dense: region {missing} is empty")
        self.region_of = region_of
        self.scan_id = scan_id
        order = np.argsort(region_of, kind="stable")
        bounds = np.cumsum(counts)[:-1]
        self.regions = [np.ascontiguousarray(a) for a in np.split(order, bounds)]

    @classmethod
    def from_regions(cls, regions, n_points: int, scan_id: str = "") -> "RegionMap":
        region_of = np.full(n_points, -1, dtype=np.int32)
        for rid, pts in enumerate(regions):
            pts = np.asarray(pts, dtype=np.int64)
            if np.any(region_of[pts] != -1):
                raise ValidationError("regions overlap")
            region_of[pts] = rid
        if np.any(region_of < 0):
            raise ValidationError("regions do not cover every point")
        return cls(region_of, scan_id=scan_id)

    @property
    def n_points(self) -> int:
        return self.region_of.shape[0]

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.region_of, minlength=self.n_regions)


@dataclass
class PredictionSet:
    """Per-point class probabilities (N x C) and optional feature rows (N x F)."""

    probs: np.ndarray
    features: Optional[np.ndarray] = None
    scan_id: str = ""

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float32)
        if self.probs.ndim != 2:
            raise ValidationError("probs must be a 2-D matrix")
        if self.probs.shape[1] < 2:
            raise ValidationError("probs needs at least 2 classes")
        if not np.all(np.isfinite(self.probs)):
            raise ValidationError("probs contain non-finite values")
        if self.probs.min() < 0.0 or self.probs.max() > 1.0:
            raise ValidationError("probabilities must lie in [0, 1]")
        sums = self.probs.astype(np.float64).sum(axis=1)
        bad = np.abs(sums - 1.0) > ROW_SUM_TOL
        if np.any(bad):
            i = int(np.nonzero(bad)[0][0])
            raise ValidationError(f"probs row {i} sums to {sums[i]:.6f}, expected 1 +/- {ROW_SUM_TOL}")
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float32)
            if self.features.ndim != 2 or self.features.shape[1] < 1:
                raise ValidationError("features must be an (N, F>=1) matrix")
            if self.features.shape[0] != self.probs.shape[0]:
                raise ValidationError("features row count does not match probs")
            if not np.all(np.isfinite(self.features)):
                raise ValidationError("features contain non-finite values")

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]


def validate_predictions(pred: PredictionSet, cloud: PointCloud) -> None:
    """Check a PredictionSet against the scan it claims to describe."""
    if pred.n != cloud.n:
        raise ValidationError(
            f"prediction rows ({pred.n}) do not match scan point count ({cloud.n})"
        )
    # Row-level invariants were checked at construction; re-assert them so
    # callers can validate instances built through other paths.
    PredictionSet(pred.probs, pred.features, pred.scan_id)


@dataclass
class LabelMask:
    """Per-point class ids (0..C-1) with UNLABELED = 255 for unknown points."""

    labels: np.ndarray
    scan_id: str = ""

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        if self.labels.size == 0:
            raise ValidationError("label mask must be non-empty")

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def labeled_count(self) -> int:
        return int(np.count_nonzero(self.labels != UNLABELED))

    def labeled_fraction(self) -> float:
        return self.labeled_count() / self.n

    @classmethod
    def empty(cls, n: int, scan_id: str = "") -> "LabelMask":
        return cls(np.full(n, UNLABELED, dtype=np.uint8), scan_id=scan_id)


@dataclass
class ScanEntry:
    n_points: int
    mask: LabelMask
    regions: RegionMap


class DatasetState:
    """Labeled / unlabeled pools at region granularity.

    A region belongs to the labeled pool iff every one of its points is
    labeled in the scan mask.  Labeled point counts only ever grow; writing
    UNLABELED over a labeled point is rejected.
    """

    def __init__(self, rng_seed: int = 0):
        self.scans: dict[str, ScanEntry] = {}
        self.labeled_region_set: set[tuple[str, int]] = set()
        self.round_index = 0
        self.rng_seed = rng_seed

    def add_scan(self, scan_id: str, regions: RegionMap, mask: Optional[LabelMask] = None):
        if scan_id in self.scans:
            raise ValidationError(f"scan {scan_id!r} already registered")
        if mask is None:
            mask = LabelMask.empty(regions.n_points, scan_id=scan_id)
        if mask.n != regions.n_points:
            raise ValidationError("mask length does not match region map")
        self.scans[scan_id] = ScanEntry(regions.n_points, mask, regions)
        for rid, pts in enumerate(regions.regions):
            if np.all(mask.labels[pts] != UNLABELED):
                self.labeled_region_set.add((scan_id, rid))

    def is_region_labeled(self, scan_id: str, region_id: int) -> bool:
        return (scan_id, region_id) in self.labeled_region_set

    def label_region(self, scan_id: str, region_id: int, labels: np.ndarray) -> int:
        """Write ground-truth labels for one region; returns points added."""
        if (scan_id, region_id) in self.labeled_region_set:
            raise ValidationError(f"region ({scan_id!r}, {region_id}) already labeled")
        entry = self.scans[scan_id]
        pts = entry.regions.regions[region_id]
        labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
        if labels.shape[0] != pts.shape[0]:
            raise ValidationError("label slice length does not match region size")
        if np.any(labels == UNLABELED):
            raise ValidationError("ground-truth labels contain the UNLABELED sentinel")
        before = entry.mask.labeled_count()
        entry.mask.labels[pts] = labels
        self.labeled_region_set.add((scan_id, region_id))
        return entry.mask.labeled_count() - before

    def labeled_points(self) -> int:
        return sum(e.mask.labeled_count() for e in self.scans.values())

    def total_points(self) -> int:
        return sum(e.n_points for e in self.scans.values())

    def candidate_regions(self):
        """Yield (scan_id, region_id, size) for every region outside the labeled pool."""
        for scan_id in sorted(self.scans):
            entry = self.scans[scan_id]
            for rid, pts in enumerate(entry.regions.regions):
                if (scan_id, rid) not in self.labeled_region_set:
                    yield scan_id, rid, int(pts.shape[0])

    def scan_is_fully_labeled(self, scan_id: str) -> bool:
        entry = self.scans[scan_id]
        return entry.mask.labeled_count() == entry.n_points

    def check_consistency(self):
        """Assert the labeled-region/point iff-invariant over the whole state."""
        for scan_id, entry in self.scans.items():
            for rid, pts in enumerate(entry.regions.regions):
                all_labeled = bool(np.all(entry.mask.labels[pts] != UNLABELED))
                in_set = (scan_id, rid) in self.labeled_region_set
                if all_labeled != in_set:
                    raise ValidationError(
                        f"labeled_region_set inconsistent at ({scan_id!r}, {rid}): "
                        f"mask says {all_labeled}, set says {in_set}"
                    )
