"""Bit-exact file formats: scan ingestion plus the four binary containers.

All binary containers are little-endian with an 8-byte ASCII magic followed
by u32 dimensions:

    REDALPRB  u32 N, u32 C, then N*C float32 row-major probabilities
    REDALFTR  u32 N, u32 F, then N*F float32 row-major features
    REDALREG  u32 N, then N u32 region ids
    REDALLBL  u32 N, then N u8 class ids (255 = unlabeled)

Scans come in two shapes: KITTI-style `.bin` (N x 16 bytes, LE float32
x, y, z, intensity) and ASCII `.xyzrgb` (one "x y z r g b" line per point,
color channels 0-255).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .types import PointCloud, ValidationError

MAGIC_PROBS = b"REDALPRB"
MAGIC_FEATURES = b"REDALFTR"
MAGIC_REGIONS = b"REDALREG"
MAGIC_LABELS = b"REDALLBL"

_TWO_DIM_MAGICS = (MAGIC_PROBS, MAGIC_FEATURES)
_ALL_MAGICS = (MAGIC_PROBS, MAGIC_FEATURES, MAGIC_REGIONS, MAGIC_LABELS)

SCAN_FORMATS = ("kitti_bin", "ascii_xyzrgb")


class FormatError(ValidationError):
    """A file's bytes do not match the declared container layout."""


# ---------------------------------------------------------------------------
# binary containers


def save_matrix(path, magic: bytes, payload) -> None:
    """Write one container; `magic` selects the layout."""
    if isinstance(magic, str):
        magic = magic.encode("ascii")
    if magic not in _ALL_MAGICS:
        raise FormatError(f"unknown magic {magic!r}")
    path = Path(path)
    if magic in _TWO_DIM_MAGICS:
        arr = np.asarray(payload, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise FormatError(f"{magic.decode()} payload must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"{magic.decode()} payload contains NaN or infinity")
        header = magic + struct.pack("<II", arr.shape[0], arr.shape[1])
        body = arr.astype("<f4", copy=False).tobytes(order="C")
    elif magic == MAGIC_REGIONS:
        arr = np.asarray(payload)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise FormatError("REDALREG payload must be a non-empty vector")
        if arr.min() < 0 or arr.max() > 0xFFFFFFFF:
            raise FormatError("region ids out of u32 range")
        header = magic + struct.pack("<I", arr.shape[0])
        body = arr.astype("<u4").tobytes()
    else:  # MAGIC_LABELS
        arr = np.asarray(payload)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise FormatError("REDALLBL payload must be a non-empty vector")
        if arr.min() < 0 or arr.max() > 255:
            raise FormatError("labels out of u8 range")
        header = magic + struct.pack("<I", arr.shape[0])
        body = arr.astype(np.uint8).tobytes()
    path.write_bytes(header + body)


def load_matrix(path, expect_magic: bytes | str | None = None):
    """Read one container; returns (magic, payload array).

    The magic and declared dimensions are validated against the byte count
    before the payload is decoded.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise FormatError(f"{path}: file too short for a container header")
    magic = raw[:8]
    if magic not in _ALL_MAGICS:
        raise FormatError(f"{path}: unknown magic {magic!r}")
    if expect_magic is not None:
        want = expect_magic.encode("ascii") if isinstance(expect_magic, str) else expect_magic
        if magic != want:
            raise FormatError(f"{path}: magic mismatch, expected {want!r} got {magic!r}")
    if magic in _TWO_DIM_MAGICS:
        if len(raw) < 16:
            raise FormatError(f"{path}: truncated header")
        n, c = struct.unpack("<II", raw[8:16])
        if n < 1 or c < 1:
            raise FormatError(f"{path}: degenerate dimensions {n} x {c}")
        expected = 16 + 4 * n * c
        if len(raw) != expected:
            raise FormatError(f"{path}: size mismatch, header says {n} x {c} "
                              f"({expected} bytes) but file has {len(raw)}")
        arr = np.frombuffer(raw, dtype="<f4", offset=16).reshape(n, c).copy()
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"{path}: float payload contains NaN or infinity")
        return magic, arr
    if magic == MAGIC_REGIONS:
        if len(raw) < 12:
            raise FormatError(f"{path}: truncated header")
        (n,) = struct.unpack("<I", raw[8:12])
        expected = 12 + 4 * n
        if n < 1 or len(raw) != expected:
            raise FormatError(f"{path}: size mismatch, header says {n} ids "
                              f"({expected} bytes) but file has {len(raw)}")
        return magic, np.frombuffer(raw, dtype="<u4", offset=12).astype(np.int64)
    (n,) = struct.unpack("<I", raw[8:12])
    expected = 12 + n
    if n < 1 or len(raw) != expected:
        raise FormatError(f"{path}: size mismatch, header says {n} labels "
                          f"({expected} bytes) but file has {len(raw)}")
    return magic, np.frombuffer(raw, dtype=np.uint8, offset=12).copy()


def save_probabilities(path, probs) -> None:
    save_matrix(path, MAGIC_PROBS, probs)


def load_probabilities(path) -> np.ndarray:
    return load_matrix(path, MAGIC_PROBS)[1]


def save_features(path, features) -> None:
    save_matrix(path, MAGIC_FEATURES, features)


def load_features(path) -> np.ndarray:
    return load_matrix(path, MAGIC_FEATURES)[1]


def save_regions(path, region_of) -> None:
    save_matrix(path, MAGIC_REGIONS, region_of)


def load_regions(path) -> np.ndarray:
    return load_matrix(path, MAGIC_REGIONS)[1]


def save_labels(path, labels) -> None:
    save_matrix(path, MAGIC_LABELS, labels)


def load_labels(path) -> np.ndarray:
    return load_matrix(path, MAGIC_LABELS)[1]


# ---------------------------------------------------------------------------
# scan files


def load_scan(path, fmt: str) -> PointCloud:
    """Decode one scan file into a PointCloud.

    kitti_bin: N = file_size / 16 little-endian float32 (x, y, z, intensity)
    quadruples, no colors.  ascii_xyzrgb: "x y z r g b" per line with color
    channels 0-255, normalized to [0, 1] on load.
    """
    path = Path(path)
    if fmt == "kitti_bin":
        raw = path.read_bytes()
        if len(raw) == 0:
            raise FormatError(f"{path}: empty scan file")
        if len(raw) % 16 != 0:
            raise FormatError(f"{path}: truncated kitti_bin, {len(raw)} bytes "
                              "is not a multiple of 16")
        data = np.frombuffer(raw, dtype="<f4").reshape(-1, 4)
        return PointCloud(
            positions=data[:, :3].copy(),
            intensity=data[:, 3].copy(),
            scan_id=path.stem,
        )
    if fmt == "ascii_xyzrgb":
        text = path.read_text(encoding="utf-8")
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise FormatError(f"{path}: empty scan file")
        positions = np.empty((len(lines), 3), dtype=np.float32)
        colors = np.empty((len(lines), 3), dtype=np.float32)
        for i, line in enumerate(lines):
            tokens = line.split()
            if len(tokens) != 6:
                raise FormatError(f"{path}:{i + 1}: expected 6 tokens, got {len(tokens)}")
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise FormatError(f"{path}:{i + 1}: non-numeric token") from None
            positions[i] = np.float32(values[0]), np.float32(values[1]), np.float32(values[2])
            for ch in range(3):
                v = values[3 + ch]
                if not (0.0 <= v <= 255.0):
                    raise FormatError(f"{path}:{i + 1}: color channel {v} outside 0-255")
                colors[i, ch] = np.float32(v / 255.0)
        return PointCloud(positions=positions, colors=colors, scan_id=path.stem)
    raise FormatError(f"unknown scan format {fmt!r}")


def write_scan(path, cloud: PointCloud, fmt: str) -> None:
    """Persist a scan so load_scan round-trips positions bitwise."""
    path = Path(path)
    if fmt == "kitti_bin":
        intensity = cloud.intensity
        if intensity is None:
            intensity = np.zeros(cloud.n, dtype=np.float32)
        data = np.column_stack([cloud.positions.astype("<f4"), intensity.astype("<f4")])
        path.write_bytes(data.tobytes(order="C"))
        return
    if fmt == "ascii_xyzrgb":
        if cloud.colors is None:
            raise FormatError("ascii_xyzrgb requires colors")
        # 9 significant digits round-trip any float32 exactly.
        rgb = np.rint(cloud.colors.astype(np.float64) * 255.0).astype(np.int64)
        lines = []
        for (x, y, z), (r, g, b) in zip(cloud.positions.tolist(), rgb.tolist()):
            lines.append(f"{x:.9g} {y:.9g} {z:.9g} {r} {g} {b}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return
    raise FormatError(f"unknown scan format {fmt!r}")
