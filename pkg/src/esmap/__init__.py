"""Evidential semantic voxel mapping.

Per-voxel Dirichlet evidence accumulated by sparse-kernel Bayesian kernel
inference, with measurement weights derived from evidential uncertainty,
plus evaluation metrics and a seeded synthetic-scene harness.
"""

from .errors import MapFormatError, ParseError, ValidationError
from .evidence import (
    dirichlet_from_evidence,
    edl_mse_loss,
    evidence_from_logits,
    expected_probs,
    kl_to_uniform,
    masked_alpha,
    total_edl_loss,
    total_edl_loss_grad,
    vacuity,
)
from .geometry import Pose, transform_points
from .kernel import KernelParams, sparse_kernel, support_radius
from .mapping import (
    MapConfig,
    SemanticPoint,
    VoxelMap,
    VoxelQuery,
    point_label_vector,
    point_weight,
)
from .metrics import MetricsReport, evaluate, metrics_from_confusion
from .formats import (
    deserialize_map,
    read_ground_truth,
    read_poses,
    read_scan,
    serialize_map,
    write_ground_truth,
    write_poses,
    write_scan,
)
from .synthetic import SyntheticScene, SyntheticSceneSpec, generate_synthetic, write_dataset

__version__ = "0.1.0"

__all__ = [
    "MapFormatError", "ParseError", "ValidationError",
    "dirichlet_from_evidence", "edl_mse_loss", "evidence_from_logits",
    "expected_probs", "kl_to_uniform", "masked_alpha", "total_edl_loss",
    "total_edl_loss_grad", "vacuity",
    "Pose", "transform_points",
    "KernelParams", "sparse_kernel", "support_radius",
    "MapConfig", "SemanticPoint", "VoxelMap", "VoxelQuery",
    "point_label_vector", "point_weight",
    "MetricsReport", "evaluate", "metrics_from_confusion",
    "deserialize_map", "read_ground_truth", "read_poses", "read_scan",
    "serialize_map", "write_ground_truth", "write_poses", "write_scan",
    "SyntheticScene", "SyntheticSceneSpec", "generate_synthetic", "write_dataset",
]
