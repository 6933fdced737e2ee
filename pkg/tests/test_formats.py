import numpy as np
import pytest

from regionpick import FormatError, PointCloud, load_matrix, load_scan, save_matrix, write_scan
from regionpick.formats import (
    MAGIC_LABELS,
    MAGIC_PROBS,
    MAGIC_REGIONS,
    load_labels,
    load_probabilities,
    load_regions,
    save_labels,
    save_probabilities,
    save_regions,
)


def test_kitti_bin_zero_case(tmp_path):
    path = tmp_path / "z.bin"
    path.write_bytes(bytes(32))
    cloud = load_scan(path, "kitti_bin")
    assert cloud.n == 2
    assert np.array_equal(cloud.positions, np.zeros((2, 3), dtype=np.float32))
    assert np.array_equal(cloud.intensity, np.zeros(2, dtype=np.float32))
    assert cloud.colors is None


def test_kitti_bin_truncated_and_empty(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(bytes(20))
    with pytest.raises(FormatError):
        load_scan(path, "kitti_bin")
    path.write_bytes(b"")
    with pytest.raises(FormatError):
        load_scan(path, "kitti_bin")


def test_ascii_identity_decode(tmp_path):
    path = tmp_path / "p.xyzrgb"
    path.write_text("1.0 2.0 3.0 255 0 0\n")
    cloud = load_scan(path, "ascii_xyzrgb")
    assert cloud.n == 1
    assert np.array_equal(cloud.positions[0], np.asarray([1, 2, 3], dtype=np.float32))
    assert np.allclose(cloud.colors[0], [1.0, 0.0, 0.0])


def test_ascii_errors(tmp_path):
    path = tmp_path / "p.xyzrgb"
    path.write_text("1 2 3 255 0\n")
    with pytest.raises(FormatError):
        load_scan(path, "ascii_xyzrgb")
    path.write_text("1 2 x 255 0 0\n")
    with pytest.raises(FormatError):
        load_scan(path, "ascii_xyzrgb")
    path.write_text("1 2 3 300 0 0\n")
    with pytest.raises(FormatError):
        load_scan(path, "ascii_xyzrgb")
    path.write_text("\n\n")
    with pytest.raises(FormatError):
        load_scan(path, "ascii_xyzrgb")


@pytest.mark.parametrize("fmt", ["kitti_bin", "ascii_xyzrgb"])
def test_scan_round_trip_bitwise(tmp_path, fmt):
    rng = np.random.default_rng(11)
    positions = (rng.normal(scale=40.0, size=(1000, 3))).astype(np.float32)
    if fmt == "kitti_bin":
        cloud = PointCloud(positions, intensity=rng.random(1000).astype(np.float32))
    else:
        colors = (rng.integers(0, 256, size=(1000, 3)) / 255.0).astype(np.float32)
        cloud = PointCloud(positions, colors=colors)
    path = tmp_path / f"scan.{fmt}"
    write_scan(path, cloud, fmt)
    back = load_scan(path, fmt)
    assert back.positions.tobytes() == cloud.positions.tobytes()
    if fmt == "kitti_bin":
        assert back.intensity.tobytes() == cloud.intensity.tobytes()
    else:
        assert back.colors.tobytes() == cloud.colors.tobytes()


def test_labels_payload_bytes(tmp_path):
    path = tmp_path / "l.bin"
    save_labels(path, np.asarray([0, 1, 255], dtype=np.uint8))
    raw = path.read_bytes()
    assert raw[:8] == MAGIC_LABELS
    assert raw[12:] == bytes([0, 1, 255])
    assert np.array_equal(load_labels(path), [0, 1, 255])


def test_probs_round_trip(tmp_path):
    path = tmp_path / "p.bin"
    save_probabilities(path, np.asarray([[0.5, 0.5]], dtype=np.float32))
    back = load_probabilities(path)
    assert np.array_equal(back, np.asarray([[0.5, 0.5]], dtype=np.float32))


def test_regions_size_mismatch(tmp_path):
    path = tmp_path / "r.bin"
    save_regions(path, np.arange(8))
    raw = bytearray(path.read_bytes())
    raw[8:12] = (10).to_bytes(4, "little")  # claims N=10 but carries 8 ids
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_regions(path)


def test_magic_mismatch_and_unknown(tmp_path):
    path = tmp_path / "x.bin"
    save_regions(path, np.arange(4))
    with pytest.raises(FormatError):
        load_matrix(path, MAGIC_PROBS)
    path.write_bytes(b"NOTMAGIC" + bytes(8))
    with pytest.raises(FormatError):
        load_matrix(path)


def test_nan_payload_rejected(tmp_path):
    path = tmp_path / "n.bin"
    with pytest.raises(FormatError):
        save_matrix(path, MAGIC_PROBS, np.asarray([[np.nan, 1.0]]))
    # Hand-craft a file with NaN to exercise the reader-side check too.
    import struct
    payload = struct.pack("<ff", float("nan"), 1.0)
    path.write_bytes(MAGIC_PROBS + struct.pack("<II", 1, 2) + payload)
    with pytest.raises(FormatError):
        load_matrix(path)


@pytest.mark.parametrize("magic,shape,dtype", [
    (MAGIC_PROBS, (7, 3), np.float32),
    (b"REDALFTR", (5, 8), np.float32),
    (MAGIC_REGIONS, (64,), np.uint32),
    (MAGIC_LABELS, (64,), np.uint8),
])
def test_container_round_trip_bitwise(tmp_path, magic, shape, dtype):
    rng = np.random.default_rng(int.from_bytes(magic[:2], "little"))
    if dtype is np.float32:
        payload = rng.random(shape).astype(np.float32)
        if magic == MAGIC_PROBS:
            payload = payload / payload.sum(axis=1, keepdims=True)
    else:
        payload = rng.integers(0, 200, size=shape).astype(dtype)
    path = tmp_path / "c.bin"
    save_matrix(path, magic, payload)
    got_magic, back = load_matrix(path)
    assert got_magic == magic
    assert np.asarray(back, dtype=dtype).tobytes() == payload.tobytes()
    # saving the loaded payload reproduces the file byte for byte
    path2 = tmp_path / "c2.bin"
    save_matrix(path2, magic, back)
    assert path2.read_bytes() == path.read_bytes()
