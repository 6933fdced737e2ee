"""Region information estimation and ranking.

A region's information score combines three region means: softmax entropy
of the point predictions, 1-norm color discontinuity against k nearest
neighbors, and surface-variation structural complexity:

    phi = alpha * H + beta * C + gamma * S

Tables rank regions by descending phi with deterministic
(scan_id, region_id) tie-breaks.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .types import PredictionSet, RegionMap, ValidationError

_LOG_CLAMP = 1e-12

SCORE_HEADER = "scan_id\tregion_id\tpoints\tH\tC\tS\tphi"
ADJUSTED_HEADER = SCORE_HEADER + "\tcluster\tphi_star"


@dataclass(frozen=True)
class RegionInfoWeights:
    """Linear combination weights; entropy dominates by default."""

    alpha: float = 1.0
    beta: float = 0.1
    gamma: float = 0.05

    def __post_init__(self):
        for name, v in (("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)):
            if not np.isfinite(v) or v < 0.0:
                raise ValidationError(f"{name} must be finite and >= 0, got {v}")


@dataclass
class ScoreRow:
    scan_id: str
    region_id: int
    points: int
    entropy: float
    color_disc: float
    struct_complexity: float
    phi: float


@dataclass
class AdjustedRow:
    scan_id: str
    region_id: int
    points: int
    entropy: float
    color_disc: float
    struct_complexity: float
    phi: float
    cluster: int
    phi_star: float


class ScoreTable:
    """Ranked region records; `sort()` orders by (-phi, scan_id, region_id)."""

    def __init__(self, rows: Optional[list[ScoreRow]] = None):
        self.rows: list[ScoreRow] = list(rows) if rows else []
        self.sorted = False

    def extend(self, rows: Iterable[ScoreRow]):
        self.rows.extend(rows)
        self.sorted = False

    def sort(self) -> "ScoreTable":
        self.rows.sort(key=lambda r: (-r.phi, r.scan_id, r.region_id))
        self.sorted = True
        return self

    def __len__(self) -> int:
        return len(self.rows)

    def to_tsv(self) -> str:
        lines = [SCORE_HEADER]
        for r in self.rows:
            lines.append("\t".join([
                r.scan_id, str(r.region_id), str(r.points),
                repr(r.entropy), repr(r.color_disc), repr(r.struct_complexity),
                repr(r.phi),
            ]))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")

    @classmethod
    def from_tsv(cls, text: str) -> "ScoreTable":
        lines = text.splitlines()
        if not lines or lines[0] != SCORE_HEADER:
            raise ValidationError("bad score table header")
        rows = []
        for ln in lines[1:]:
            if not ln:
                continue
            f = ln.split("\t")
            if len(f) != 7:
                raise ValidationError(f"score row has {len(f)} fields, expected 7")
            rows.append(ScoreRow(f[0], int(f[1]), int(f[2]), float(f[3]),
                                 float(f[4]), float(f[5]), float(f[6])))
        table = cls(rows)
        return table

    @classmethod
    def load(cls, path) -> "ScoreTable":
        return cls.from_tsv(Path(path).read_text(encoding="utf-8"))


def adjusted_to_tsv(rows: list[AdjustedRow]) -> str:
    lines = [ADJUSTED_HEADER]
    for r in rows:
        lines.append("\t".join([
            r.scan_id, str(r.region_id), str(r.points),
            repr(r.entropy), repr(r.color_disc), repr(r.struct_complexity),
            repr(r.phi), str(r.cluster), repr(r.phi_star),
        ]))
    return "\n".join(lines) + "\n"


def adjusted_from_tsv(text: str) -> list[AdjustedRow]:
    lines = text.splitlines()
    if not lines or lines[0] != ADJUSTED_HEADER:
        raise ValidationError("bad adjusted table header")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        f = ln.split("\t")
        if len(f) != 9:
            raise ValidationError(f"adjusted row has {len(f)} fields, expected 9")
        rows.append(AdjustedRow(f[0], int(f[1]), int(f[2]), float(f[3]), float(f[4]),
                                float(f[5]), float(f[6]), int(f[7]), float(f[8])))
    return rows


def point_entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy (natural log) per row, with 0*log(0) treated as 0."""
    p = probs.astype(np.float64)
    logs = np.log(np.clip(p, _LOG_CLAMP, 1.0))
    return -(p * logs).sum(axis=1)


def _region_mean(values: np.ndarray, regions: RegionMap) -> np.ndarray:
    sizes = regions.sizes().astype(np.float64)
    sums = np.bincount(regions.region_of, weights=values, minlength=regions.n_regions)
    return sums / sizes


def region_entropy(pred: PredictionSet, regions: RegionMap) -> np.ndarray:
    """Mean per-point softmax entropy of each region; in [0, ln C]."""
    if pred.n != regions.n_points:
        raise ValidationError("prediction rows do not match region map size")
    return _region_mean(point_entropy(pred.probs), regions)


def region_color_discontinuity(point_scores: np.ndarray, regions: RegionMap) -> np.ndarray:
    """Mean per-point color discontinuity of each region."""
    point_scores = np.asarray(point_scores, dtype=np.float64).reshape(-1)
    if point_scores.shape[0] != regions.n_points:
        raise ValidationError("point scores do not match region map size")
    return _region_mean(point_scores, regions)


def region_structural_complexity(surf_var: np.ndarray, regions: RegionMap) -> np.ndarray:
    """Mean per-point surface variation of each region; in [0, 1/3]."""
    surf_var = np.asarray(surf_var, dtype=np.float64).reshape(-1)
    if surf_var.shape[0] != regions.n_points:
        raise ValidationError("surface variation does not match region map size")
    return _region_mean(surf_var, regions)


def combine_information(entropy, color_disc, struct_complexity, weights: RegionInfoWeights,
                        scan_id: str, point_counts, region_ids=None) -> ScoreTable:
    """Build an unsorted per-scan score table with phi = a*H + b*C + g*S."""
    h = np.asarray(entropy, dtype=np.float64).reshape(-1)
    c = np.asarray(color_disc, dtype=np.float64).reshape(-1)
    s = np.asarray(struct_complexity, dtype=np.float64).reshape(-1)
    pts = np.asarray(point_counts, dtype=np.int64).reshape(-1)
    if not (h.shape == c.shape == s.shape == pts.shape):
        raise ValidationError("score components must have equal lengths")
    if region_ids is None:
        region_ids = np.arange(h.shape[0], dtype=np.int64)
    else:
        region_ids = np.asarray(region_ids, dtype=np.int64).reshape(-1)
        if region_ids.shape != h.shape:
            raise ValidationError("region_ids length mismatch")
    phi = weights.alpha * h + weights.beta * c + weights.gamma * s
    rows = [
        ScoreRow(scan_id, int(region_ids[i]), int(pts[i]),
                 float(h[i]), float(c[i]), float(s[i]), float(phi[i]))
        for i in range(h.shape[0])
    ]
    return ScoreTable(rows)
