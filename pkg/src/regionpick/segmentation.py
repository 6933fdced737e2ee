"""Unsupervised over-segmentation into sub-scene regions of median size.

The algorithm is a simplified voxel-cloud clustering: voxelize the scan,
drop one seed per occupied coarse grid cell (snapped to the cell's occupied
voxel nearest the cell center), then grow regions over the 26-connected
voxel graph by repeatedly claiming the voxel with the smallest mixed
spatial/color distance to a region centroid.  Growth runs for a fixed
number of rounds with centroid updates in between; afterwards undersized
regions are merged into their nearest-centroid neighbor.

Purity is not a goal here; the output only has to be a deterministic,
connected partition whose pieces are small enough to act as labeling units.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .types import PointCloud, RegionMap, ValidationError

_OFFSETS_26 = [
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
]


@dataclass(frozen=True)
class SegmentationParams:
    r_seed: float = 1.0
    r_voxel: float = 0.1
    w_spatial: float = 1.0
    w_color: float = 0.5
    min_region_points: int = 10
    max_iters: int = 5

    def __post_init__(self):
        if not (self.r_seed > self.r_voxel > 0.0):
            raise ValidationError(
                f"need r_seed > r_voxel > 0, got r_seed={self.r_seed}, r_voxel={self.r_voxel}"
            )
        if self.w_spatial < 0.0 or self.w_color < 0.0 or self.w_spatial + self.w_color <= 0.0:
            raise ValidationError("mixing weights must be non-negative with a positive sum")
        if self.min_region_points < 1:
            raise ValidationError("min_region_points must be >= 1")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")


INDOOR_PARAMS = SegmentationParams(r_seed=1.0, r_voxel=0.1)
OUTDOOR_PARAMS = SegmentationParams(r_seed=10.0, r_voxel=0.5)


class _VoxelGrid:
    """Occupied voxels of a scan with per-voxel point statistics."""

    def __init__(self, cloud: PointCloud, r_voxel: float):
        pos64 = cloud.positions.astype(np.float64)
        coords = np.floor(pos64 / r_voxel).astype(np.int64)
        uniq, inverse = np.unique(coords, axis=0, return_inverse=True)
        self.n_voxels = uniq.shape[0]
        self.coords = uniq
        self.point_voxel = inverse
        counts = np.bincount(inverse, minlength=self.n_voxels).astype(np.float64)
        self.point_counts = counts.astype(np.int64)
        sums = np.zeros((self.n_voxels, 3))
        np.add.at(sums, inverse, pos64)
        self.positions = sums / counts[:, None]
        self.point_pos_sums = sums
        if cloud.colors is not None:
            csums = np.zeros((self.n_voxels, 3))
            np.add.at(csums, inverse, cloud.colors.astype(np.float64))
            self.colors = csums / counts[:, None]
        else:
            self.colors = None
        lookup = {tuple(c): i for i, c in enumerate(uniq.tolist())}
        self.neighbors: list[list[int]] = []
        for c in uniq.tolist():
            nbrs = []
            for dx, dy, dz in _OFFSETS_26:
                j = lookup.get((c[0] + dx, c[1] + dy, c[2] + dz))
                if j is not None:
                    nbrs.append(j)
            self.neighbors.append(nbrs)


def _seed_voxels(grid: _VoxelGrid, r_seed: float) -> list[int]:
    """One seed per occupied r_seed cell: the member voxel nearest the cell center."""
    cells = np.floor(grid.positions / r_seed).astype(np.int64)
    best: dict[tuple, tuple[float, int]] = {}
    centers = (cells + 0.5) * r_seed
    d2 = ((grid.positions - centers) ** 2).sum(axis=1)
    for v, (cell, dist) in enumerate(zip(map(tuple, cells.tolist()), d2.tolist())):
        cur = best.get(cell)
        if cur is None or dist < cur[0]:
            best[cell] = (dist, v)
    return [v for _, v in sorted(best.values(), key=lambda t: t[1])]


def _flood(grid: _VoxelGrid, sources: list[int], cent_pos, cent_col, params: SegmentationParams):
    """Claim every reachable voxel for the source with minimal mixed distance."""
    w_s = params.w_spatial / params.r_seed
    w_c = params.w_color if grid.colors is not None else 0.0
    pos = grid.positions.tolist()
    col = grid.colors.tolist() if grid.colors is not None else None
    cp = cent_pos.tolist()
    cc = cent_col.tolist() if cent_col is not None else None

    def dist(v: int, c: int) -> float:
        p = pos[v]
        q = cp[c]
        d = w_s * math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + (p[2] - q[2]) ** 2)
        if w_c > 0.0 and col is not None and cc is not None:
            a = col[v]
            b = cc[c]
            d += w_c * math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)
        return d

    label = np.full(grid.n_voxels, -1, dtype=np.int64)
    heap = [(dist(v, c), c, v) for c, v in enumerate(sources)]
    heapq.heapify(heap)
    neighbors = grid.neighbors
    while heap:
        _, c, v = heapq.heappop(heap)
        if label[v] != -1:
            continue
        label[v] = c
        for u in neighbors[v]:
            if label[u] == -1:
                heapq.heappush(heap, (dist(u, c), c, u))
    return label


def _centroids(grid: _VoxelGrid, label: np.ndarray, n_clusters: int):
    assigned = label >= 0
    lab = label[assigned]
    counts = np.bincount(lab, minlength=n_clusters).astype(np.float64)
    counts = np.maximum(counts, 1.0)
    pos = np.zeros((n_clusters, 3))
    np.add.at(pos, lab, grid.positions[assigned])
    pos /= counts[:, None]
    if grid.colors is not None:
        col = np.zeros((n_clusters, 3))
        np.add.at(col, lab, grid.colors[assigned])
        col /= counts[:, None]
    else:
        col = None
    return pos, col


def grow_voxel_regions(grid: _VoxelGrid, params: SegmentationParams) -> np.ndarray:
    """Pre-merge voxel labels: seeded growth plus orphan-component regions.

    Exposed separately so the connectivity contract of the growth stage can
    be checked on its own.
    """
    seeds = _seed_voxels(grid, params.r_seed)
    cent_pos = grid.positions[seeds].copy()
    cent_col = grid.colors[seeds].copy() if grid.colors is not None else None
    label = _flood(grid, seeds, cent_pos, cent_col, params)
    for _ in range(params.max_iters - 1):
        cent_pos, cent_col = _centroids(grid, label, len(seeds))
        sources = []
        for c in range(len(seeds)):
            members = np.nonzero(label == c)[0]
            if members.size == 0:
                sources.append(seeds[c])
                continue
            d2 = ((grid.positions[members] - cent_pos[c]) ** 2).sum(axis=1)
            sources.append(int(members[int(np.argmin(d2))]))
        new_label = _flood(grid, sources, cent_pos, cent_col, params)
        if np.array_equal(new_label, label):
            label = new_label
            break
        label = new_label
    # Components unreachable from any seed become their own regions.
    next_id = int(label.max()) + 1 if label.size else 0
    for v in range(grid.n_voxels):
        if label[v] != -1:
            continue
        queue = [v]
        label[v] = next_id
        while queue:
            u = queue.pop()
            for w in grid.neighbors[u]:
                if label[w] == -1:
                    label[w] = next_id
                    queue.append(w)
        next_id += 1
    return label


def _merge_small(grid: _VoxelGrid, label: np.ndarray, params: SegmentationParams) -> np.ndarray:
    """Fold regions below min_region_points into their closest neighbor."""
    n_clusters = int(label.max()) + 1
    members: list[set[int]] = [set() for _ in range(n_clusters)]
    for v, c in enumerate(label.tolist()):
        members[c].add(v)
    pts = np.bincount(label, weights=grid.point_counts.astype(np.float64),
                      minlength=n_clusters).astype(np.int64)
    pos_sums = np.zeros((n_clusters, 3))
    np.add.at(pos_sums, label, grid.point_pos_sums)
    alive = [bool(m) for m in members]

    def centroid(c: int) -> np.ndarray:
        return pos_sums[c] / max(int(pts[c]), 1)

    while True:
        small = [c for c in range(n_clusters)
                 if alive[c] and pts[c] < params.min_region_points]
        if not small or sum(alive) <= 1:
            break
        c = min(small, key=lambda i: (pts[i], i))
        adjacent = set()
        for v in members[c]:
            for u in grid.neighbors[v]:
                lu = int(label[u])
                if lu != c and alive[lu]:
                    adjacent.add(lu)
        pool = sorted(adjacent) if adjacent else [i for i in range(n_clusters)
                                                  if alive[i] and i != c]
        ctr = centroid(c)
        target = min(pool, key=lambda i: (float(((centroid(i) - ctr) ** 2).sum()), i))
        for v in members[c]:
            label[v] = target
        members[target] |= members[c]
        members[c] = set()
        pts[target] += pts[c]
        pos_sums[target] += pos_sums[c]
        pts[c] = 0
        alive[c] = False
    return label


def segment(cloud: PointCloud, params: SegmentationParams | None = None, seed: int = 0) -> RegionMap:
    """Partition a scan into sub-scene regions.

    Deterministic for fixed (cloud, params); the `seed` argument is accepted
    for interface stability but the grid-snapped initialization never draws
    from it.
    """
    if params is None:
        params = SegmentationParams()
    del seed
    if cloud.n == 1:
        return RegionMap(np.zeros(1, dtype=np.int32), scan_id=cloud.scan_id)
    grid = _VoxelGrid(cloud, params.r_voxel)
    label = grow_voxel_regions(grid, params)
    label = _merge_small(grid, label, params)
    point_label = label[grid.point_voxel]
    # Canonical dense ids, ordered by each region's smallest point index.
    first_seen: dict[int, int] = {}
    for p, c in enumerate(point_label.tolist()):
        if c not in first_seen:
            first_seen[c] = p
    remap = {c: rank for rank, (c, _) in
             enumerate(sorted(first_seen.items(), key=lambda kv: kv[1]))}
    region_of = np.asarray([remap[c] for c in point_label.tolist()], dtype=np.int32)
    return RegionMap(region_of, scan_id=cloud.scan_id)
