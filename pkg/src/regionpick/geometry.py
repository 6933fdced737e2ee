"""Spatial indexing and local point descriptors.

The index is a balanced kd-tree whose queries reproduce brute-force
k-nearest-neighbor results exactly, including ties: candidates are ordered
by (squared distance, point index), so equal-distance neighbors resolve to
the lower index.  This determinism is what makes golden-file tests of the
downstream descriptors possible.
"""

from __future__ import annotations

import heapq

import numpy as np

from .types import PointCloud, ValidationError

# Neighborhood size used for both descriptors unless a caller overrides it.
DEFAULT_K = 50

_LEAF_SIZE = 32


class MissingColorsError(ValidationError):
    """Raised when a color-based descriptor is requested for a colorless scan."""


class SpatialIndex:
    """Balanced kd-tree over scan positions with deterministic tie handling."""

    def __init__(self, positions, leaf_size: int = _LEAF_SIZE):
        pts = np.asarray(positions, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError("positions must have shape (N, 3)")
        if pts.shape[0] < 1:
            raise ValidationError("cannot index an empty cloud")
        self._pts = pts
        self.n = pts.shape[0]
        self._leaf_size = max(int(leaf_size), 1)
        # Flat node arrays: axis < 0 marks a leaf whose points live in
        # _perm[start:end].
        self._axis: list[int] = []
        self._split: list[float] = []
        self._left: list[int] = []
        self._right: list[int] = []
        self._start: list[int] = []
        self._end: list[int] = []
        self._perm = np.empty(self.n, dtype=np.int64)
        self._cursor = 0
        self._build(np.arange(self.n, dtype=np.int64))

    def _new_node(self) -> int:
        self._axis.append(-1)
        self._split.append(0.0)
        self._left.append(-1)
        self._right.append(-1)
        self._start.append(0)
        self._end.append(0)
        return len(self._axis) - 1

    def _build(self, idx: np.ndarray) -> int:
        node = self._new_node()
        if idx.shape[0] <= self._leaf_size:
            s = self._cursor
            self._perm[s:s + idx.shape[0]] = idx
            self._cursor += idx.shape[0]
            self._start[node] = s
            self._end[node] = self._cursor
            return node
        coords = self._pts[idx]
        spread = coords.max(axis=0) - coords.min(axis=0)
        axis = int(np.argmax(spread))
        order = np.lexsort((idx, coords[:, axis]))
        idx = idx[order]
        mid = idx.shape[0] // 2
        split = float(self._pts[idx[mid], axis])
        self._axis[node] = axis
        self._split[node] = split
        self._left[node] = self._build(idx[:mid])
        self._right[node] = self._build(idx[mid:])
        return node

    def query_point(self, point, k: int, exclude: int = -1) -> np.ndarray:
        """Indices of the k nearest points to `point`, (distance, index) order."""
        if k < 1:
            raise ValidationError("k must be >= 1")
        q = np.asarray(point, dtype=np.float64).reshape(3)
        limit = self.n - (1 if 0 <= exclude < self.n else 0)
        k = min(k, limit)
        if k == 0:
            return np.empty(0, dtype=np.int64)
        heap: list[tuple[float, float]] = []  # (-d2, -idx)
        pts = self._pts
        axis_arr = self._axis
        split_arr = self._split
        stack = [(0, 0.0)]
        while stack:
            node, bound = stack.pop()
            if len(heap) == k and bound > -heap[0][0]:
                continue
            ax = axis_arr[node]
            if ax < 0:
                cand = self._perm[self._start[node]:self._end[node]]
                diff = pts[cand] - q
                d2s = np.einsum("ij,ij->i", diff, diff)
                if len(heap) == k:
                    worst = -heap[0][0]
                    keep = d2s <= worst
                    cand = cand[keep]
                    d2s = d2s[keep]
                for j, d2 in zip(cand.tolist(), d2s.tolist()):
                    if j == exclude:
                        continue
                    if len(heap) < k:
                        heapq.heappush(heap, (-d2, -j))
                    else:
                        w2 = -heap[0][0]
                        if d2 < w2 or (d2 == w2 and j < -heap[0][1]):
                            heapq.heapreplace(heap, (-d2, -j))
                continue
            delta = q[ax] - split_arr[node]
            if delta <= 0.0:
                near, far = self._left[node], self._right[node]
            else:
                near, far = self._right[node], self._left[node]
            far_bound = delta * delta
            if far_bound < bound:
                far_bound = bound
            stack.append((far, far_bound))
            stack.append((near, bound))
        result = sorted((-d2, -j) for d2, j in heap)
        return np.asarray([j for _, j in result], dtype=np.int64)

    def neighbors(self, i: int, k: int) -> np.ndarray:
        """k nearest neighbors of point i, the point itself excluded."""
        return self.query_point(self._pts[i], k, exclude=i)

    def knn_all(self, k: int) -> np.ndarray:
        """(N, min(k, N-1)) neighbor indices for every point."""
        m = min(k, self.n - 1)
        out = np.empty((self.n, m), dtype=np.int64)
        for i in range(self.n):
            out[i] = self.query_point(self._pts[i], m, exclude=i)
        return out


def build_index(cloud: PointCloud) -> SpatialIndex:
    return SpatialIndex(cloud.positions)


def color_discontinuity_points(cloud: PointCloud, index: SpatialIndex, k: int = DEFAULT_K,
                               knn: np.ndarray | None = None) -> np.ndarray:
    """Mean 1-norm color difference between each point and its k neighbors.

    Colorless scans raise MissingColorsError; callers mirroring the
    LiDAR-style setting should drop the color term instead (beta = 0).
    `knn` may carry a precomputed index.knn_all(k) result.
    """
    if cloud.colors is None:
        raise MissingColorsError(
            "scan has no colors; set the color weight (beta) to 0 for this input"
        )
    if k < 1:
        raise ValidationError("k must be >= 1")
    idx = index.knn_all(k) if knn is None else knn
    if idx.shape[1] == 0:
        return np.zeros(cloud.n, dtype=np.float64)
    colors = cloud.colors.astype(np.float64)
    diffs = np.abs(colors[idx] - colors[:, None, :]).sum(axis=2)
    return diffs.mean(axis=1)


def _sym3_eigvalsh(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of symmetric 3x3 matrices, ascending, via closed form.

    Trigonometric (Cardano) solution; tiny negative roots produced by
    cancellation are clamped to zero by the caller.
    """
    a = m[:, 0, 0]
    b = m[:, 1, 1]
    c = m[:, 2, 2]
    d = m[:, 0, 1]
    e = m[:, 1, 2]
    f = m[:, 0, 2]
    q = (a + b + c) / 3.0
    p2 = (a - q) ** 2 + (b - q) ** 2 + (c - q) ** 2 + 2.0 * (d * d + e * e + f * f)
    p = np.sqrt(np.maximum(p2 / 6.0, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        aa = (a - q) / p
        bb = (b - q) / p
        cc = (c - q) / p
        dd = d / p
        ee = e / p
        ff = f / p
        r = (aa * (bb * cc - ee * ee)
             - dd * (dd * cc - ee * ff)
             + ff * (dd * ee - bb * ff)) / 2.0
    r = np.clip(np.nan_to_num(r, nan=1.0), -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    lam = np.stack([lo, mid, hi], axis=1)
    degenerate = p2 <= 0.0
    if np.any(degenerate):
        lam[degenerate] = q[degenerate, None]
    return lam


def surface_variation_points(cloud: PointCloud, index: SpatialIndex, k: int = DEFAULT_K,
                             knn: np.ndarray | None = None) -> np.ndarray:
    """Per-point surface variation: smallest covariance eigenvalue ratio.

    For each point the 3x3 covariance of its k-neighborhood (neighbors plus
    the point itself) gives eigenvalues l0 <= l1 <= l2; the score is
    l0 / (l0 + l1 + l2), in [0, 1/3].  Degenerate neighborhoods score 0.
    """
    if k < 3:
        raise ValidationError("surface variation needs k >= 3")
    idx = index.knn_all(k) if knn is None else knn
    n = cloud.n
    self_col = np.arange(n, dtype=np.int64)[:, None]
    patch_idx = np.concatenate([self_col, idx], axis=1)
    pts = cloud.positions.astype(np.float64)
    patches = pts[patch_idx]
    centered = patches - patches.mean(axis=1, keepdims=True)
    cov = np.einsum("nij,nik->njk", centered, centered) / patch_idx.shape[1]
    lam = np.maximum(_sym3_eigvalsh(cov), 0.0)
    total = lam.sum(axis=1)
    sigma = np.zeros(n, dtype=np.float64)
    ok = total >= 1e-12
    sigma[ok] = lam[ok, 0] / total[ok]
    return np.minimum(sigma, 1.0 / 3.0)
