import numpy as np
import pytest

from regionpick import (
    UNLABELED,
    DatasetState,
    LabelMask,
    PointCloud,
    PredictionSet,
    RegionMap,
    ValidationError,
    validate_predictions,
)


def test_point_cloud_basic():
    cloud = PointCloud(np.zeros((3, 3)), scan_id="a")
    assert cloud.n == 3
    assert not cloud.has_colors


def test_point_cloud_rejects_empty_and_nonfinite():
    with pytest.raises(ValidationError):
        PointCloud(np.zeros((0, 3)))
    bad = np.zeros((2, 3))
    bad[1, 0] = np.nan
    with pytest.raises(ValidationError):
        PointCloud(bad)


def test_point_cloud_channel_lengths():
    with pytest.raises(ValidationError):
        PointCloud(np.zeros((3, 3)), colors=np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        PointCloud(np.zeros((3, 3)), intensity=np.zeros(4))


def test_region_map_partition_checks():
    rm = RegionMap([0, 0, 1, 1, 2])
    assert rm.n_regions == 3
    assert [len(r) for r in rm.regions] == [2, 2, 1]
    assert rm.sizes().sum() == rm.n_points
    with pytest.raises(ValidationError):
        RegionMap([0, 2, 2])  # region 1 missing: not dense
    with pytest.raises(ValidationError):
        RegionMap([-1, 0])


def test_region_map_from_regions_rejects_overlap_and_gaps():
    rm = RegionMap.from_regions([[0, 2], [1]], 3)
    assert np.array_equal(rm.region_of, [0, 1, 0])
    with pytest.raises(ValidationError):
        RegionMap.from_regions([[0, 1], [1, 2]], 3)
    with pytest.raises(ValidationError):
        RegionMap.from_regions([[0]], 2)


def test_prediction_set_row_sums():
    PredictionSet(np.full((4, 4), 0.25))
    with pytest.raises(ValidationError):
        PredictionSet(np.asarray([[0.7, 0.7]]))
    with pytest.raises(ValidationError):
        PredictionSet(np.asarray([[1.2, -0.2]]))


def test_validate_predictions_n_mismatch():
    cloud = PointCloud(np.zeros((99, 3)))
    pred = PredictionSet(np.full((100, 2), 0.5))
    with pytest.raises(ValidationError):
        validate_predictions(pred, cloud)


def test_dataset_state_region_bookkeeping():
    regions = RegionMap([0, 0, 1, 1, 1])
    state = DatasetState()
    state.add_scan("s", regions)
    assert state.labeled_points() == 0
    assert not state.is_region_labeled("s", 0)
    added = state.label_region("s", 0, np.asarray([2, 2], dtype=np.uint8))
    assert added == 2
    assert state.is_region_labeled("s", 0)
    state.check_consistency()
    with pytest.raises(ValidationError):
        state.label_region("s", 0, np.asarray([1, 1], dtype=np.uint8))
    with pytest.raises(ValidationError):
        state.label_region("s", 1, np.asarray([1, 1, UNLABELED], dtype=np.uint8))


def test_dataset_state_prelabeled_mask_populates_region_set():
    regions = RegionMap([0, 0, 1])
    mask = LabelMask(np.asarray([3, 3, UNLABELED], dtype=np.uint8), scan_id="s")
    state = DatasetState()
    state.add_scan("s", regions, mask)
    assert state.is_region_labeled("s", 0)
    assert not state.is_region_labeled("s", 1)
    assert list(state.candidate_regions()) == [("s", 1, 1)]
    state.check_consistency()
