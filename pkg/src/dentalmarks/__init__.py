"""Geodesic distance-map labels, augmentation, topology-driven non-minima
suppression, and precision/recall calibration for dental mesh landmarks."""

from .augment import (
    FfdLattice,
    RigidTransform,
    apply_ffd,
    apply_rigid,
    apply_scale,
    make_ffd,
    random_rigid,
    random_scale,
)
from .calibrate import CalibrationResult, calibrate
from .geodesic import DistanceMap, Variant, clamp_distances, multi_source_geodesic, sharpen
from .labels import (
    load_distance_map,
    load_landmarks,
    make_distance_labels,
    save_distance_map,
    save_landmarks,
)
from .mesh import (
    LandmarkClass,
    LandmarkSet,
    TriangleMesh,
    compute_vertex_normals,
    load_mesh,
    save_heatmap_ply,
    save_mesh,
)
from .metrics import MetricsCurve, average_metrics, map_mse, precision_recall_at
from .nms import DetectionResult, NmsParams, detect, nms_step
from .predictor import features_to_rgb, load_predictions, synthetic_predict
from .sampling import SampleSelection, farthest_point_sample, stratify_random

__version__ = "0.1.0"
