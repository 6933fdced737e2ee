"""Synthetic desk-scale room scenes with ground-truth semantic labels.

A scene is a shoebox room: floor, ceiling, and four walls, populated with
boxes (cuboids on the floor), poles (vertical cylinders), and markers
(small colored plates hanging just off a wall).  Surfaces are sampled at
per-class point densities, positions get Gaussian noise, and colors are a
per-class palette mean with per-instance and per-point jitter.

Everything is driven by one seeded generator, so a spec reproduces its
scene bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .types import LabelMask, PointCloud, ValidationError

CLASS_NAMES = ("floor", "ceiling", "wall", "box", "pole", "marker")
FLOOR, CEILING, WALL, BOX, POLE, MARKER = range(6)

DEFAULT_DENSITIES = {
    "floor": 30.0,
    "ceiling": 22.0,
    "wall": 26.0,
    "box": 90.0,
    "pole": 170.0,
    "marker": 280.0,
}

# (mean RGB, per-point jitter) per class; per-instance shifts come on top.
DEFAULT_PALETTE = {
    "floor": ((0.45, 0.42, 0.38), 0.03),
    "ceiling": ((0.85, 0.85, 0.84), 0.02),
    "wall": ((0.70, 0.67, 0.58), 0.04),
    "box": ((0.55, 0.32, 0.20), 0.05),
    "pole": ((0.25, 0.27, 0.30), 0.04),
    "marker": ((0.85, 0.15, 0.15), 0.05),
}


@dataclass
class SceneSpec:
    extents: tuple[float, float, float] = (6.0, 4.0, 2.6)
    densities: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_DENSITIES))
    palette: dict = field(default_factory=lambda: dict(DEFAULT_PALETTE))
    noise_sigma: float = 0.005
    seed: int = 0
    name: str = ""
    surfaces: Sequence[str] = ("floor", "ceiling", "wall")
    # None -> seeded random count and placement; a list pins the geometry.
    boxes: Optional[Sequence[tuple]] = None   # (cx, cy, sx, sy, sz)
    poles: Optional[Sequence[tuple]] = None   # (cx, cy, radius, height)
    markers: Optional[Sequence[tuple]] = None  # (wall 0-3, offset along wall, z, side)

    def __post_init__(self):
        w, d, h = self.extents
        if w <= 0 or d <= 0 or h <= 0:
            raise ValidationError(f"degenerate room extents {self.extents}")
        if len(CLASS_NAMES) < 2:
            raise ValidationError("need at least two classes")
        for key in self.surfaces:
            if key not in ("floor", "ceiling", "wall"):
                raise ValidationError(f"unknown surface {key!r}")
        for key, dens in self.densities.items():
            if dens <= 0:
                raise ValidationError(f"density for {key!r} must be positive")
        if self.noise_sigma < 0:
            raise ValidationError("noise sigma must be >= 0")
        if not self.name:
            self.name = f"scene{self.seed:04d}"


def _n_points(density: float, area: float) -> int:
    return max(1, int(round(density * area)))


def _sample_rect(rng, origin, u_vec, v_vec, n):
    u = rng.random(n)[:, None]
    v = rng.random(n)[:, None]
    return np.asarray(origin) + u * np.asarray(u_vec) + v * np.asarray(v_vec)


class _SceneBuilder:
    def __init__(self, spec: SceneSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.points: list[np.ndarray] = []
        self.colors: list[np.ndarray] = []
        self.labels: list[np.ndarray] = []

    def add(self, pts: np.ndarray, class_name: str, class_id: int, instance_shift):
        n = pts.shape[0]
        mean, jitter = self.spec.palette[class_name]
        col = (np.asarray(mean) + np.asarray(instance_shift)
               + self.rng.normal(0.0, jitter, size=(n, 3)))
        self.points.append(pts)
        self.colors.append(np.clip(col, 0.0, 1.0))
        self.labels.append(np.full(n, class_id, dtype=np.uint8))

    def instance_shift(self, scale: float = 0.06) -> np.ndarray:
        return self.rng.uniform(-scale, scale, size=3)


def _wall_frames(w: float, d: float, h: float):
    # origin, u (along the wall), v (up), inward normal
    return [
        ((0.0, 0.0, 0.0), (w, 0.0, 0.0), (0.0, 0.0, h), (0.0, 1.0, 0.0)),
        ((0.0, d, 0.0), (w, 0.0, 0.0), (0.0, 0.0, h), (0.0, -1.0, 0.0)),
        ((0.0, 0.0, 0.0), (0.0, d, 0.0), (0.0, 0.0, h), (1.0, 0.0, 0.0)),
        ((w, 0.0, 0.0), (0.0, d, 0.0), (0.0, 0.0, h), (-1.0, 0.0, 0.0)),
    ]


def generate_scene(spec: SceneSpec):
    """Sample one scene; returns (PointCloud, ground-truth LabelMask)."""
    rng = np.random.default_rng(spec.seed)
    w, d, h = spec.extents
    b = _SceneBuilder(spec, rng)
    dens = spec.densities

    if "floor" in spec.surfaces:
        n = _n_points(dens["floor"], w * d)
        b.add(_sample_rect(rng, (0, 0, 0), (w, 0, 0), (0, d, 0), n),
              "floor", FLOOR, b.instance_shift())
    if "ceiling" in spec.surfaces:
        n = _n_points(dens["ceiling"], w * d)
        b.add(_sample_rect(rng, (0, 0, h), (w, 0, 0), (0, d, 0), n),
              "ceiling", CEILING, b.instance_shift())
    if "wall" in spec.surfaces:
        for origin, u_vec, v_vec, _ in _wall_frames(w, d, h):
            area = np.linalg.norm(u_vec) * np.linalg.norm(v_vec)
            n = _n_points(dens["wall"], float(area))
            b.add(_sample_rect(rng, origin, u_vec, v_vec, n),
                  "wall", WALL, b.instance_shift())

    boxes = spec.boxes
    if boxes is None:
        boxes = []
        for _ in range(int(rng.integers(2, 5))):
            sx, sy, sz = rng.uniform(0.45, 1.1, size=3)
            cx = rng.uniform(sx / 2 + 0.3, w - sx / 2 - 0.3)
            cy = rng.uniform(sy / 2 + 0.3, d - sy / 2 - 0.3)
            boxes.append((cx, cy, sx, sy, sz))
    for cx, cy, sx, sy, sz in boxes:
        shift = b.instance_shift(0.10)
        x0, y0 = cx - sx / 2, cy - sy / 2
        faces = [
            ((x0, y0, sz), (sx, 0, 0), (0, sy, 0)),          # top
            ((x0, y0, 0), (sx, 0, 0), (0, 0, sz)),           # y = y0 side
            ((x0, y0 + sy, 0), (sx, 0, 0), (0, 0, sz)),      # y = y1 side
            ((x0, y0, 0), (0, sy, 0), (0, 0, sz)),           # x = x0 side
            ((x0 + sx, y0, 0), (0, sy, 0), (0, 0, sz)),      # x = x1 side
        ]
        for origin, u_vec, v_vec in faces:
            area = np.linalg.norm(u_vec) * np.linalg.norm(v_vec)
            n = _n_points(dens["box"], float(area))
            b.add(_sample_rect(rng, origin, u_vec, v_vec, n), "box", BOX, shift)

    poles = spec.poles
    if poles is None:
        poles = []
        for _ in range(int(rng.integers(1, 4))):
            radius = rng.uniform(0.05, 0.10)
            height = rng.uniform(1.2, h)
            cx = rng.uniform(radius + 0.2, w - radius - 0.2)
            cy = rng.uniform(radius + 0.2, d - radius - 0.2)
            poles.append((cx, cy, radius, height))
    for cx, cy, radius, height in poles:
        shift = b.instance_shift(0.05)
        area = 2.0 * np.pi * radius * height
        n = _n_points(dens["pole"], float(area))
        theta = rng.random(n) * 2.0 * np.pi
        z = rng.random(n) * height
        pts = np.column_stack([cx + radius * np.cos(theta),
                               cy + radius * np.sin(theta), z])
        b.add(pts, "pole", POLE, shift)

    markers = spec.markers
    if markers is None:
        markers = []
        for _ in range(int(rng.integers(2, 6))):
            wall = int(rng.integers(0, 4))
            offset = rng.uniform(0.15, 0.85)
            z = rng.uniform(0.8, h - 0.6)
            side = rng.uniform(0.25, 0.45)
            markers.append((wall, offset, z, side))
    frames = _wall_frames(w, d, h)
    for wall, offset, z, side in markers:
        shift = b.instance_shift(0.08)
        origin, u_vec, v_vec, normal = frames[int(wall)]
        u_len = float(np.linalg.norm(u_vec))
        u_hat = np.asarray(u_vec) / u_len
        # 1 cm standoff from the wall so markers have geometric edges too.
        start = (np.asarray(origin) + u_hat * (offset * u_len - side / 2)
                 + np.asarray([0.0, 0.0, z - side / 2]) + 0.01 * np.asarray(normal))
        n = _n_points(dens["marker"], side * side)
        b.add(_sample_rect(rng, start, u_hat * side, (0, 0, side), n),
              "marker", MARKER, shift)

    positions = np.concatenate(b.points, axis=0)
    if spec.noise_sigma > 0:
        positions = positions + rng.normal(0.0, spec.noise_sigma, size=positions.shape)
    colors = np.concatenate(b.colors, axis=0)
    # Quantize to the on-disk 0-255 grid so file round trips are exact.
    colors = np.rint(colors * 255.0) / 255.0
    labels = np.concatenate(b.labels, axis=0)
    cloud = PointCloud(positions=positions.astype(np.float32),
                       colors=colors.astype(np.float32), scan_id=spec.name)
    return cloud, LabelMask(labels, scan_id=spec.name)


def benchmark_specs(n_scenes: int = 20, seed: int = 7) -> list[SceneSpec]:
    """Scene specs for the synthetic label-efficiency benchmark.

    Rooms vary in size and palette tint per scene so class appearance is
    multi-modal across the corpus.
    """
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(n_scenes):
        w = float(rng.uniform(5.0, 7.0))
        d = float(rng.uniform(3.4, 5.0))
        h = float(rng.uniform(2.4, 3.0))
        palette = {}
        for name, (mean, jitter) in DEFAULT_PALETTE.items():
            tint = rng.uniform(-0.10, 0.10, size=3)
            palette[name] = (tuple(np.clip(np.asarray(mean) + tint, 0.05, 0.95)), jitter)
        specs.append(SceneSpec(
            extents=(w, d, h),
            palette=palette,
            seed=int(rng.integers(0, 2**31 - 1)),
            name=f"scene{i:03d}",
        ))
    return specs
