"""Per-voxel evaluation of a semantic map against ground-truth labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .mapping import VoxelKey, VoxelMap


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation summary.

    per_class_iou holds NaN for classes absent from the ground truth; miou
    averages over present classes only. confusion[t, p] counts ground-truth
    class t predicted as p, so its total equals evaluated_voxels.
    """

    overall_accuracy: float
    per_class_iou: np.ndarray
    miou: float
    evaluated_voxels: int
    confusion: np.ndarray

    def present_classes(self) -> list[int]:
        return [c for c in range(len(self.per_class_iou))
                if not np.isnan(self.per_class_iou[c])]


def metrics_from_confusion(confusion: np.ndarray) -> MetricsReport:
    """Derive accuracy and IoU from a (truth x predicted) count matrix."""
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValidationError(f"confusion matrix must be square, got shape {cm.shape}")
    total = int(cm.sum())
    k = cm.shape[0]
    correct = int(np.trace(cm))
    accuracy = correct / total if total else 0.0

    tp = np.diag(cm).astype(np.float64)
    fn = cm.sum(axis=1) - tp
    fp = cm.sum(axis=0) - tp
    present = cm.sum(axis=1) > 0

    iou = np.full(k, np.nan)
    denom = tp + fp + fn
    for c in range(k):
        if present[c]:
            iou[c] = tp[c] / denom[c] if denom[c] > 0 else 0.0
    miou = float(np.mean(iou[present])) if np.any(present) else 0.0
    return MetricsReport(overall_accuracy=accuracy, per_class_iou=iou, miou=miou,
                         evaluated_voxels=total, confusion=cm)


def evaluate(vmap: VoxelMap, ground_truth: dict[VoxelKey, int],
             include_unobserved: bool = True) -> MetricsReport:
    """Score map argmax predictions over the ground-truth voxels.

    Voxels absent from the map predict the prior argmax (class 0 by the
    lowest-index tie rule). With include_unobserved=False they are skipped
    instead of counted.
    """
    if not ground_truth:
        raise ValidationError("ground truth is empty")
    k = vmap.config.num_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    for key, true_cls in ground_truth.items():
        if not 0 <= true_cls < k:
            raise ValidationError(f"ground-truth class {true_cls} out of range for K={k}")
        if key not in vmap:
            if not include_unobserved:
                continue
            pred = 0
        else:
            pred = vmap.query_voxel(key).class_id
        confusion[true_cls, pred] += 1
    return metrics_from_confusion(confusion)
