"""Region-based, diversity-aware active-learning selection for 3D point clouds."""

from .types import (
    UNLABELED,
    DatasetState,
    LabelMask,
    PointCloud,
    PredictionSet,
    RegionMap,
    ValidationError,
    validate_predictions,
)
from .formats import (
    FormatError,
    load_matrix,
    load_scan,
    save_matrix,
    write_scan,
)
from .geometry import (
    DEFAULT_K,
    MissingColorsError,
    SpatialIndex,
    build_index,
    color_discontinuity_points,
    surface_variation_points,
)
from .segmentation import INDOOR_PARAMS, OUTDOOR_PARAMS, SegmentationParams, segment
from .scoring import (
    RegionInfoWeights,
    ScoreRow,
    ScoreTable,
    combine_information,
    region_color_discontinuity,
    region_entropy,
    region_structural_complexity,
)
from .diversity import (
    ClusterModel,
    PenaltyParams,
    RegionFeatureSet,
    diversity_adjusted_rows,
    kmeans,
    penalize_similar,
    pool_region_features,
)
from .selection import (
    Budget,
    SelectionBatch,
    acquire_labels,
    acquire_scans,
    coreset_select,
    save_state,
    load_state,
    scan_acquisition_order,
    score_scans,
    select_regions,
)
from .metrics import class_distribution_ratio, compute_iou
from .scenes import CLASS_NAMES, SceneSpec, benchmark_specs, generate_scene
from .simulate import (
    LoopConfig,
    PrototypePredictor,
    RoundReport,
    ScanBundle,
    fit_predictor,
    format_reports,
    parse_reports,
    point_features,
    predict,
    prepare_scan,
    prepare_scenes,
    run_active_loop,
)

__version__ = "0.1.0"
