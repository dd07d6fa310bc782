"""Seeded synthetic terrain scenes for robustness studies at desk scale.

The scene is a patchwork of terrain classes over a smooth height field.
Each scan samples surface voxels and emits evidential points; a seeded
fraction of points carries a corrupted (wrong-class) label. Corruption
comes in two flavors controlled by the vacuity correlation gamma: with
probability gamma the wrong label arrives with near-zero total evidence
(high vacuity), otherwise with confidently wrong evidence. This is the
regime knob for studying when uncertainty-aware weighting helps.

Determinism: all randomness flows through one numpy Philox bit generator
(a named 64-bit counter-based RNG), consumed in a fixed order, so an
identical spec yields a bit-identical dataset on any platform. Draw counts
do not depend on noise_rate or vacuity_correlation, so two specs differing
only in those fields share the same point layout and corruption mask.

Geometry note: points are jittered uniformly within the middle half of
their surface voxel (quarter-resolution jitter). For kernel length scales
in (0.44 * resolution, 0.75 * resolution] every point then contributes to
exactly its own voxel, which makes per-voxel label battles exact.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import Pose
from .mapping import SemanticPoint, VoxelKey
from . import formats


@dataclass(frozen=True)
class SyntheticSceneSpec:
    """Parameters of a generated scene; identical specs give identical bytes."""

    seed: int = 0
    extent: float = 50.0
    num_classes: int = 4
    points_per_scan: int = 5000
    num_scans: int = 10
    noise_rate: float = 0.0
    vacuity_correlation: float = 1.0
    resolution: float = 0.5
    patch_size: float = 5.0
    high_evidence: float = 20.0
    low_evidence: float = 0.2
    low_label_fraction: float = 0.5

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.extent <= 0.0:
            raise ValidationError(f"extent must be > 0, got {self.extent}")
        if self.resolution <= 0.0 or self.extent < self.resolution:
            raise ValidationError("resolution must be > 0 and <= extent")
        if self.patch_size <= 0.0:
            raise ValidationError(f"patch_size must be > 0, got {self.patch_size}")
        if not (0.0 <= self.noise_rate <= 1.0):
            raise ValidationError(f"noise_rate must be in [0, 1], got {self.noise_rate}")
        if not (0.0 <= self.vacuity_correlation <= 1.0):
            raise ValidationError(
                f"vacuity_correlation must be in [0, 1], got {self.vacuity_correlation}")
        if self.points_per_scan < 0 or self.num_scans < 0:
            raise ValidationError("points_per_scan and num_scans must be >= 0")
        if self.high_evidence <= 0.0 or self.low_evidence <= 0.0:
            raise ValidationError("evidence magnitudes must be > 0")
        if not (0.0 < self.low_label_fraction <= 1.0):
            raise ValidationError(
                f"low_label_fraction must be in (0, 1], got {self.low_label_fraction}")

    @classmethod
    def from_file(cls, path) -> "SyntheticSceneSpec":
        kv = formats.parse_key_values(path)
        valid = {f.name: f.type for f in fields(cls)}
        unknown = set(kv) - set(valid)
        if unknown:
            raise ParseError(f"{path}: unknown spec keys {sorted(unknown)}; "
                             f"valid keys are {sorted(valid)}")
        kwargs = {}
        for f in fields(cls):
            if f.name not in kv:
                continue
            caster = int if f.name in ("seed", "num_classes", "points_per_scan",
                                       "num_scans") else float
            try:
                kwargs[f.name] = caster(kv[f.name])
            except ValueError:
                raise ParseError(f"{path}: {f.name} must be a {caster.__name__}: "
                                 f"{kv[f.name]!r}") from None
        try:
            return cls(**kwargs)
        except ValidationError as exc:
            raise ParseError(f"{path}: {exc}") from exc

    def entries(self) -> dict[str, object]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SyntheticScene:
    """Generated dataset: sensor-frame scans with poses, per-voxel truth,
    and the generator's own corruption masks (one bool array per scan)."""

    spec: SyntheticSceneSpec
    scans: list[tuple[list[SemanticPoint], Pose]]
    ground_truth: dict[VoxelKey, int]
    corruption_masks: list[np.ndarray]


def _rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def generate_synthetic(spec: SyntheticSceneSpec) -> SyntheticScene:
    """Generate the scene deterministically from spec.seed."""
    rng = np.random.Generator(np.random.Philox(spec.seed))
    k = spec.num_classes
    res = spec.resolution
    n_cols = int(spec.extent / res)

    # scene layout: smooth height field plus a seeded class patchwork
    wavelength = rng.uniform(spec.extent / 3.0, spec.extent / 1.5, size=2)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=2)
    amplitude = 0.04 * spec.extent
    n_patches = int(np.ceil(spec.extent / spec.patch_size))
    patch_classes = rng.integers(0, k, size=(n_patches, n_patches))

    def surface_height(x, y):
        return amplitude * (np.sin(2.0 * np.pi * x / wavelength[0] + phase[0])
                            + np.cos(2.0 * np.pi * y / wavelength[1] + phase[1]))

    def column_class(i, j):
        px = np.minimum(((i + 0.5) * res / spec.patch_size).astype(np.int64), n_patches - 1)
        py = np.minimum(((j + 0.5) * res / spec.patch_size).astype(np.int64), n_patches - 1)
        return patch_classes[px, py]

    ground_truth: dict[VoxelKey, int] = {}
    scans = []
    masks = []
    center = spec.extent / 2.0
    for s in range(spec.num_scans):
        n = spec.points_per_scan
        ci = rng.integers(0, n_cols, size=n)
        cj = rng.integers(0, n_cols, size=n)
        jitter = rng.uniform(-res / 4.0, res / 4.0, size=(n, 3))
        corrupt_draw = rng.uniform(size=n)
        wrong_offset = rng.integers(1, k, size=n)
        vacuous_draw = rng.uniform(size=n)

        xc = (ci + 0.5) * res
        yc = (cj + 0.5) * res
        k_surf = np.floor(surface_height(xc, yc) / res).astype(np.int64)
        zc = (k_surf + 0.5) * res
        world = np.stack([xc, yc, zc], axis=1) + jitter

        true_cls = column_class(ci, cj)
        corrupted = corrupt_draw < spec.noise_rate
        vacuous = corrupted & (vacuous_draw < spec.vacuity_correlation)
        labels = np.where(corrupted, (true_cls + wrong_offset) % k, true_cls)

        evidence = np.zeros((n, k))
        evidence[np.arange(n), labels] = spec.high_evidence
        if np.any(vacuous):
            f = spec.low_label_fraction
            low = np.full((int(vacuous.sum()), k), spec.low_evidence * (1.0 - f) / k)
            low[np.arange(len(low)), labels[vacuous]] += spec.low_evidence * f
            evidence[vacuous] = low

        for i, key in enumerate(zip(ci.tolist(), cj.tolist(), k_surf.tolist())):
            ground_truth.setdefault(key, int(true_cls[i]))

        angle = 2.0 * np.pi * s / max(spec.num_scans, 1)
        sensor = np.array([center + 0.4 * spec.extent * np.cos(angle),
                           center + 0.4 * spec.extent * np.sin(angle),
                           3.0 * amplitude + 1.0])
        pose = Pose.from_rotation_translation(_rot_z(angle + np.pi), sensor)
        sensor_frame = pose.inverse().apply(world)
        points = [SemanticPoint.from_evidence(sensor_frame[i], evidence[i])
                  for i in range(n)]
        scans.append((points, pose))
        masks.append(corrupted)

    return SyntheticScene(spec=spec, scans=scans, ground_truth=ground_truth,
                          corruption_masks=masks)


def write_dataset(scene: SyntheticScene, outdir) -> None:
    """Write scans/, poses.txt, and truth.txt under outdir."""
    outdir = Path(outdir)
    scan_dir = outdir / "scans"
    scan_dir.mkdir(parents=True, exist_ok=True)
    for idx, (points, _) in enumerate(scene.scans):
        formats.write_scan(scan_dir / f"scan_{idx:04d}.esm", points,
                           scene.spec.num_classes)
    formats.write_poses(outdir / "poses.txt", [pose for _, pose in scene.scans])
    formats.write_ground_truth(outdir / "truth.txt", scene.ground_truth)
