"""Rigid-body poses and point-cloud transformation into the world frame."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .mapping import SemanticPoint


class Pose:
    """A 4x4 homogeneous transform with a proper rotation block.

    Validated on construction: R^T R = I and det R = +1 within 1e-9, last
    row (0, 0, 0, 1).
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValidationError(f"pose must be 4x4, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("pose has non-finite entries")
        r = m[:3, :3]
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9):
            raise ValidationError("pose rotation block is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValidationError("pose rotation block must have determinant +1 within 1e-9")
        if not np.array_equal(m[3], [0.0, 0.0, 0.0, 1.0]):
            raise ValidationError("pose last row must be (0, 0, 0, 1)")
        self.matrix = m

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(4))

    @classmethod
    def from_rotation_translation(cls, rotation, translation) -> "Pose":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self @ other)(p) = self(other(p))."""
        return Pose(self.matrix @ other.matrix)

    def inverse(self) -> "Pose":
        r_inv = self.rotation.T
        return Pose.from_rotation_translation(r_inv, -r_inv @ self.translation)

    def apply(self, positions: np.ndarray) -> np.ndarray:
        """Map an (N, 3) or (3,) array of positions by p -> R p + t."""
        p = np.asarray(positions, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def __repr__(self):
        return f"Pose(t={self.translation.tolist()})"


def transform_points(pose: Pose, points: list[SemanticPoint]) -> list[SemanticPoint]:
    """Map point positions into the pose's target frame; payloads unchanged."""
    return [pt.with_position(pose.apply(pt.position)) for pt in points]
