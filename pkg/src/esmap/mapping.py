"""Sparse voxel map with uncertainty-weighted Bayesian kernel inference.

Each voxel holds a Dirichlet concentration vector that accumulates kernel-
and confidence-weighted class evidence from semantic point measurements:

    alpha*_c  +=  sum_i  k(||x_i - x*||) * w_i * ybar_{i,c}

where k is the compact-support sparse kernel, w_i the per-measurement
weight derived from evidential vacuity, and ybar_i the measurement's label
vector. Voxels never lose evidence; absent voxels sit implicitly at the
prior (alpha0, ..., alpha0).

Summation contract: within update_scan, contributions are accumulated in
input point order. Permuting the points of a scan therefore yields alpha
components identical up to floating-point reassociation, bounded by 1e-9
relative error; bit-identical output under permutation is NOT claimed.

Concurrency: a map is a single-writer object. update_scan requires
exclusive access; queries may run concurrently with each other but not
with an in-flight update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

import numpy as np

from .errors import ValidationError
from .evidence import dirichlet_from_evidence, expected_probs, vacuity, validate_evidence
from .kernel import KernelParams, sparse_kernel, support_radius

LabelMode = Literal["hard_onehot", "soft_probs"]
Weighting = Literal["uniform", "one_minus_vacuity"]

LABEL_MODES = ("hard_onehot", "soft_probs")
WEIGHTINGS = ("uniform", "one_minus_vacuity")

VoxelKey = tuple[int, int, int]

# Evidence magnitude standing in for confidence == 1.0 when a hard label is
# encoded as one-hot evidence (keeps vacuity finite-positive).
MAX_LABEL_EVIDENCE = 1e6


@dataclass(frozen=True)
class MapConfig:
    """Voxel map configuration.

    resolution: voxel edge length in meters.
    num_classes: number of semantic classes K (>= 2).
    prior_alpha: per-class Dirichlet prior concentration of untouched voxels.
    kernel: sparse kernel parameters.
    weight_floor: lower bound for the confidence weight (w_min).
    label_mode: hard_onehot accumulates one-hot argmax labels (classical
        semantic BKI); soft_probs accumulates expected class probabilities.
    weighting: uniform gives every measurement weight 1; one_minus_vacuity
        weights by max(1 - u, weight_floor).
    """

    resolution: float = 0.1
    num_classes: int = 2
    prior_alpha: float = 0.001
    kernel: KernelParams = field(default_factory=KernelParams)
    weight_floor: float = 0.0
    label_mode: LabelMode = "hard_onehot"
    weighting: Weighting = "one_minus_vacuity"

    def __post_init__(self):
        if not (np.isfinite(self.resolution) and self.resolution > 0.0):
            raise ValidationError(f"resolution must be finite and > 0, got {self.resolution}")
        if int(self.num_classes) != self.num_classes or self.num_classes < 2:
            raise ValidationError(f"num_classes must be an integer >= 2, got {self.num_classes}")
        if not (np.isfinite(self.prior_alpha) and self.prior_alpha > 0.0):
            raise ValidationError(f"prior_alpha must be finite and > 0, got {self.prior_alpha}")
        if not (0.0 <= self.weight_floor <= 1.0):
            raise ValidationError(f"weight_floor must be in [0, 1], got {self.weight_floor}")
        if self.label_mode not in LABEL_MODES:
            raise ValidationError(f"label_mode must be one of {LABEL_MODES}, got {self.label_mode!r}")
        if self.weighting not in WEIGHTINGS:
            raise ValidationError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")


class SemanticPoint:
    """A world- or sensor-frame point with a semantic payload.

    The payload is either a length-K evidence vector or a hard
    (label, confidence) pair. Hard labels can be encoded as one-hot
    evidence whose magnitude reproduces vacuity u = 1 - confidence.
    """

    __slots__ = ("position", "evidence", "label", "confidence")

    def __init__(self, position, evidence=None, label=None, confidence=None):
        self.position = np.asarray(position, dtype=np.float64)
        if self.position.shape != (3,):
            raise ValidationError(f"position must be a 3-vector, got shape {self.position.shape}")
        if evidence is not None:
            if label is not None or confidence is not None:
                raise ValidationError("point payload is either evidence or (label, confidence)")
            self.evidence = validate_evidence(evidence)
            self.label = None
            self.confidence = None
        else:
            if label is None or confidence is None:
                raise ValidationError("hard-labeled point needs both label and confidence")
            if not (0.0 <= confidence <= 1.0):
                raise ValidationError(f"confidence must be in [0, 1], got {confidence}")
            if int(label) < 0:
                raise ValidationError(f"label must be >= 0, got {label}")
            self.evidence = None
            self.label = int(label)
            self.confidence = float(confidence)

    @classmethod
    def from_evidence(cls, position, evidence) -> "SemanticPoint":
        return cls(position, evidence=evidence)

    @classmethod
    def from_label(cls, position, label: int, confidence: float) -> "SemanticPoint":
        return cls(position, label=label, confidence=confidence)

    def with_position(self, position) -> "SemanticPoint":
        if self.evidence is not None:
            return SemanticPoint(position, evidence=self.evidence)
        return SemanticPoint(position, label=self.label, confidence=self.confidence)

    def encoded_evidence(self, num_classes: int) -> np.ndarray:
        """One-hot evidence for hard labels, scaled so u = 1 - confidence."""
        if self.evidence is not None:
            return self.evidence
        if self.label >= num_classes:
            raise ValidationError(f"label {self.label} out of range for K={num_classes}")
        if self.confidence >= 1.0:
            magnitude = MAX_LABEL_EVIDENCE
        else:
            magnitude = num_classes * self.confidence / (1.0 - self.confidence)
        e = np.zeros(num_classes)
        e[self.label] = magnitude
        return e

    def __repr__(self):
        if self.evidence is not None:
            return f"SemanticPoint({self.position.tolist()}, evidence={self.evidence.tolist()})"
        return (f"SemanticPoint({self.position.tolist()}, label={self.label}, "
                f"confidence={self.confidence})")


def point_weight(point: SemanticPoint, config: MapConfig) -> float:
    """Per-measurement confidence weight in [weight_floor, 1].

    uniform weighting returns 1. one_minus_vacuity returns
    max(1 - u, weight_floor) with u the vacuity of the point's
    evidence-derived Dirichlet, or 1 - confidence for hard labels.
    """
    if config.weighting == "uniform":
        return 1.0
    if point.evidence is not None:
        if point.evidence.shape[-1] != config.num_classes:
            raise ValidationError(
                f"evidence length {point.evidence.shape[-1]} != K={config.num_classes}")
        u = vacuity(dirichlet_from_evidence(point.evidence))
    else:
        u = 1.0 - point.confidence
    return max(1.0 - u, config.weight_floor)


def point_label_vector(point: SemanticPoint, config: MapConfig) -> np.ndarray:
    """Measurement label vector ybar accumulated into the Dirichlet update.

    hard_onehot: one-hot at the argmax of the expected probabilities, ties
    broken toward the lowest class index. soft_probs: the expected
    probabilities themselves.
    """
    k = config.num_classes
    if point.evidence is not None and point.evidence.shape[-1] != k:
        raise ValidationError(f"evidence length {point.evidence.shape[-1]} != K={k}")
    if config.label_mode == "hard_onehot":
        if point.evidence is not None:
            cls = int(np.argmax(expected_probs(dirichlet_from_evidence(point.evidence))))
        else:
            if point.label >= k:
                raise ValidationError(f"label {point.label} out of range for K={k}")
            cls = point.label
        out = np.zeros(k)
        out[cls] = 1.0
        return out
    return expected_probs(dirichlet_from_evidence(point.encoded_evidence(k)))


@dataclass(frozen=True)
class VoxelQuery:
    """Result of querying one voxel: argmax class, probabilities,
    clamped map vacuity, and the per-class Dirichlet marginal variance."""

    class_id: int
    probs: np.ndarray
    map_vacuity: float
    variance: np.ndarray


class VoxelMap:
    """Sparse voxel grid of Dirichlet concentrations at fixed resolution."""

    def __init__(self, config: MapConfig):
        self.config = config
        self._cells: dict[VoxelKey, np.ndarray] = {}
        self.scan_count = 0

    def __len__(self) -> int:
        return len(self._cells)

    def __contains__(self, key: VoxelKey) -> bool:
        return tuple(key) in self._cells

    def items(self) -> Iterator[tuple[VoxelKey, np.ndarray]]:
        return iter(self._cells.items())

    def keys(self):
        return self._cells.keys()

    def alpha(self, key: VoxelKey) -> np.ndarray:
        """Concentration vector of a voxel; the prior for untouched voxels."""
        stored = self._cells.get(tuple(key))
        if stored is not None:
            return stored.copy()
        return np.full(self.config.num_classes, self.config.prior_alpha)

    def voxel_key(self, position) -> VoxelKey:
        """floor(position / resolution) componentwise."""
        p = np.asarray(position, dtype=np.float64)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ValidationError(f"position must be a finite 3-vector, got {position!r}")
        idx = np.floor(p / self.config.resolution)
        return (int(idx[0]), int(idx[1]), int(idx[2]))

    def voxel_center(self, key: VoxelKey) -> np.ndarray:
        return (np.asarray(key, dtype=np.float64) + 0.5) * self.config.resolution

    def update_scan(self, points: Sequence[SemanticPoint]) -> None:
        """Accumulate one scan of world-frame points into the map.

        Every voxel whose center lies within the kernel support of a point
        receives that point's kernel- and confidence-weighted label vector.
        Invalid input rejects the whole scan atomically; an empty scan is a
        valid no-op that still counts toward scan_count.
        """
        cfg = self.config
        k = cfg.num_classes
        n = len(points)
        if n == 0:
            self.scan_count += 1
            return

        positions = np.empty((n, 3))
        weights = np.empty(n)
        labels = np.empty((n, k))
        for i, pt in enumerate(points):
            if not np.all(np.isfinite(pt.position)):
                raise ValidationError(f"point {i} has non-finite position; scan rejected")
            positions[i] = pt.position
            weights[i] = point_weight(pt, cfg)
            labels[i] = point_label_vector(pt, cfg)

        staged = self._accumulate(positions, weights, labels)

        for key, inc in staged.items():
            cell = self._cells.get(key)
            if cell is None:
                cell = np.full(k, cfg.prior_alpha)
                self._cells[key] = cell
            cell += inc
        self.scan_count += 1

    def _accumulate(self, positions: np.ndarray, weights: np.ndarray,
                    labels: np.ndarray) -> dict[VoxelKey, np.ndarray]:
        """Stage per-voxel increments without touching the map.

        Iterates the (2r+1)^3 voxel neighborhood of each point, r =
        ceil(length_scale / resolution), which covers every voxel center
        within the kernel support. Zero contributions (outside support or
        weight 0) never materialize a voxel.
        """
        cfg = self.config
        res = cfg.resolution
        radius = support_radius(cfg.kernel)
        r = math.ceil(radius / res)
        side = 2 * r + 1
        grid = np.arange(-r, r + 1)
        offsets = np.stack(np.meshgrid(grid, grid, grid, indexing="ij"),
                           axis=-1).reshape(-1, 3)
        n_off = side ** 3

        base = np.floor(positions / res).astype(np.int64)
        staged: dict[VoxelKey, np.ndarray] = {}

        # chunk so the (points x offsets) pair table stays bounded in memory
        chunk = max(1, 2_000_000 // n_off)
        for lo in range(0, len(positions), chunk):
            hi = min(lo + chunk, len(positions))
            keys = base[lo:hi, None, :] + offsets[None, :, :]        # (n, O, 3)
            centers = (keys + 0.5) * res
            dist = np.linalg.norm(centers - positions[lo:hi, None, :], axis=-1)
            contrib = sparse_kernel(dist, cfg.kernel) * weights[lo:hi, None]
            mask = contrib > 0.0
            if not np.any(mask):
                continue
            flat_keys = keys[mask]
            flat_contrib = contrib[mask]
            point_idx = np.broadcast_to(np.arange(lo, hi)[:, None], mask.shape)[mask]

            uniq, inv = np.unique(flat_keys, axis=0, return_inverse=True)
            inc = np.empty((len(uniq), labels.shape[1]))
            for c in range(labels.shape[1]):
                inc[:, c] = np.bincount(inv, weights=flat_contrib * labels[point_idx, c],
                                        minlength=len(uniq))
            for row, key in enumerate(uniq):
                tkey = (int(key[0]), int(key[1]), int(key[2]))
                cell = staged.get(tkey)
                if cell is None:
                    staged[tkey] = inc[row].copy()
                else:
                    cell += inc[row]
        return staged

    def query_voxel(self, key: VoxelKey) -> VoxelQuery:
        """Class estimate, probabilities, clamped vacuity, and variance of a voxel.

        map_vacuity is min(1, K/S): the relaxed accessor is defined for any
        alpha > 0 and clamps prior voxels (alpha0 < 1) to full uncertainty.
        variance_c = alpha_c (S - alpha_c) / (S^2 (S + 1)).
        """
        alpha = self.alpha(key)
        s = float(np.sum(alpha))
        probs = alpha / s
        k = self.config.num_classes
        variance = alpha * (s - alpha) / (s * s * (s + 1.0))
        return VoxelQuery(
            class_id=int(np.argmax(probs)),
            probs=probs,
            map_vacuity=min(1.0, k / s),
            variance=variance,
        )

    def query_point(self, position) -> VoxelQuery:
        """Resolve a world position to its voxel and query it."""
        return self.query_voxel(self.voxel_key(position))
