"""File formats: semantic scans, pose files, serialized maps, ground truth.

All formats are versioned. Text files carry floats through repr(), which
round-trips every finite float64 exactly; the map file is binary
(little-endian) for bit-exact round-trips at any size.

    scan (text):          header "ESM1 <num_points> <K>", then one line per
                          point: "x y z e_1 ... e_K"
    poses (text):         one pose per line, 12 numbers: the top 3 rows of
                          the 4x4 matrix, row-major
    map (binary):         magic "ESMMAP1", config block, voxel records of
                          (i, j, k int32) + K float64 concentrations
    ground truth (text):  one line per voxel: "i j k class_id"
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import MapFormatError, ParseError, ValidationError
from .geometry import Pose
from .kernel import KernelParams
from .mapping import LABEL_MODES, WEIGHTINGS, MapConfig, SemanticPoint, VoxelMap

SCAN_MAGIC = "ESM1"
MAP_MAGIC = b"ESMMAP1"

_CONFIG_STRUCT = struct.Struct("<dIddddBB")
_COUNTS_STRUCT = struct.Struct("<QQ")
_KEY_STRUCT = struct.Struct("<iii")


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_float(token: str, path, lineno: int, what: str) -> float:
    try:
        v = float(token)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: {what} is not a number: {token!r}") from None
    if not np.isfinite(v):
        raise ParseError(f"{path}:{lineno}: {what} is not finite: {token!r}")
    return v


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

def write_scan(path, points: list[SemanticPoint], num_classes: int) -> None:
    """Write points with evidence payloads; hard labels are encoded as
    one-hot evidence scaled by a confidence-derived magnitude."""
    path = Path(path)
    lines = [f"{SCAN_MAGIC} {len(points)} {num_classes}"]
    for pt in points:
        e = pt.encoded_evidence(num_classes)
        coords = " ".join(_fmt(c) for c in pt.position)
        ev = " ".join(_fmt(v) for v in e)
        lines.append(f"{coords} {ev}")
    path.write_text("\n".join(lines) + "\n")


def read_scan(path) -> tuple[list[SemanticPoint], int]:
    """Parse a scan file; returns the points and the declared class count."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scan {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise ParseError(f"{path}:1: empty file, expected '{SCAN_MAGIC} <num_points> <K>' header")
    header = lines[0].split()
    if len(header) != 3 or header[0] != SCAN_MAGIC:
        raise ParseError(f"{path}:1: malformed header {lines[0]!r}, "
                         f"expected '{SCAN_MAGIC} <num_points> <K>'")
    try:
        count, k = int(header[1]), int(header[2])
    except ValueError:
        raise ParseError(f"{path}:1: header counts must be integers: {lines[0]!r}") from None
    if k < 2:
        raise ParseError(f"{path}:1: K must be >= 2, got {k}")
    if count < 0:
        raise ParseError(f"{path}:1: negative point count {count}")

    body = [(i + 2, ln) for i, ln in enumerate(lines[1:]) if ln.strip()]
    if len(body) != count:
        raise ParseError(f"{path}: header declares {count} points but file has {len(body)}")

    points = []
    for lineno, line in body:
        tokens = line.split()
        if len(tokens) != 3 + k:
            raise ParseError(f"{path}:{lineno}: expected {3 + k} values "
                             f"(x y z and {k} evidences), got {len(tokens)}")
        pos = [_parse_float(t, path, lineno, "coordinate") for t in tokens[:3]]
        ev = [_parse_float(t, path, lineno, "evidence") for t in tokens[3:]]
        if any(v < 0.0 for v in ev):
            raise ParseError(f"{path}:{lineno}: negative evidence")
        points.append(SemanticPoint.from_evidence(pos, ev))
    return points, k


# ---------------------------------------------------------------------------
# poses
# ---------------------------------------------------------------------------

def write_poses(path, poses: list[Pose]) -> None:
    lines = [" ".join(_fmt(v) for v in pose.matrix[:3].reshape(-1)) for pose in poses]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_poses(path) -> list[Pose]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read poses {path}: {exc}") from exc
    poses = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 12:
            raise ParseError(f"{path}:{lineno}: expected 12 numbers per pose, got {len(tokens)}")
        vals = [_parse_float(t, path, lineno, "pose entry") for t in tokens]
        m = np.eye(4)
        m[:3, :] = np.asarray(vals).reshape(3, 4)
        try:
            poses.append(Pose(m))
        except ValidationError as exc:
            raise ParseError(f"{path}:{lineno}: invalid pose: {exc}") from exc
    return poses


# ---------------------------------------------------------------------------
# map serialization
# ---------------------------------------------------------------------------

def serialize_map(vmap: VoxelMap, path) -> None:
    cfg = vmap.config
    parts = [MAP_MAGIC]
    parts.append(_CONFIG_STRUCT.pack(
        cfg.resolution, cfg.num_classes, cfg.prior_alpha,
        cfg.kernel.length_scale, cfg.kernel.signal_scale, cfg.weight_floor,
        LABEL_MODES.index(cfg.label_mode), WEIGHTINGS.index(cfg.weighting)))
    parts.append(_COUNTS_STRUCT.pack(vmap.scan_count, len(vmap)))
    record = struct.Struct(f"<iii{cfg.num_classes}d")
    for key in sorted(vmap.keys()):
        parts.append(record.pack(*key, *vmap.alpha(key)))
    Path(path).write_bytes(b"".join(parts))


def deserialize_map(path) -> VoxelMap:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise MapFormatError(f"cannot read map {path}: {exc}") from exc
    if blob[:len(MAP_MAGIC)] != MAP_MAGIC:
        raise MapFormatError(f"{path}: bad magic {blob[:len(MAP_MAGIC)]!r}, "
                             f"expected {MAP_MAGIC!r} (version mismatch or not a map file)")
    off = len(MAP_MAGIC)
    try:
        (resolution, num_classes, prior_alpha, length_scale, signal_scale,
         weight_floor, label_code, weight_code) = _CONFIG_STRUCT.unpack_from(blob, off)
        off += _CONFIG_STRUCT.size
        scan_count, num_cells = _COUNTS_STRUCT.unpack_from(blob, off)
        off += _COUNTS_STRUCT.size
    except struct.error as exc:
        raise MapFormatError(f"{path}: truncated config block: {exc}") from exc
    if label_code >= len(LABEL_MODES) or weight_code >= len(WEIGHTINGS):
        raise MapFormatError(f"{path}: unknown enum codes ({label_code}, {weight_code})")
    try:
        cfg = MapConfig(resolution=resolution, num_classes=int(num_classes),
                        prior_alpha=prior_alpha,
                        kernel=KernelParams(length_scale, signal_scale),
                        weight_floor=weight_floor,
                        label_mode=LABEL_MODES[label_code],
                        weighting=WEIGHTINGS[weight_code])
    except ValidationError as exc:
        raise MapFormatError(f"{path}: invalid config: {exc}") from exc

    vmap = VoxelMap(cfg)
    vmap.scan_count = int(scan_count)
    record = struct.Struct(f"<iii{cfg.num_classes}d")
    expected = off + num_cells * record.size
    if len(blob) != expected:
        raise MapFormatError(f"{path}: expected {expected} bytes for {num_cells} voxels, "
                             f"got {len(blob)}")
    for _ in range(num_cells):
        fields = record.unpack_from(blob, off)
        off += record.size
        key = fields[:3]
        alpha = np.asarray(fields[3:], dtype=np.float64)
        if not np.all(np.isfinite(alpha)) or np.any(alpha < cfg.prior_alpha):
            raise MapFormatError(f"{path}: voxel {key} violates the concentration "
                                 f"invariant (components must be finite and >= prior)")
        if key in vmap._cells:
            raise MapFormatError(f"{path}: duplicate voxel record {key}")
        vmap._cells[key] = alpha
    return vmap


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------

def write_ground_truth(path, truth: dict[tuple[int, int, int], int]) -> None:
    lines = [f"{i} {j} {k} {cls}" for (i, j, k), cls in sorted(truth.items())]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_ground_truth(path) -> dict[tuple[int, int, int], int]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read ground truth {path}: {exc}") from exc
    truth = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 4:
            raise ParseError(f"{path}:{lineno}: expected 'i j k class_id', got {line!r}")
        try:
            i, j, k, cls = (int(t) for t in tokens)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: indices and class must be integers") from None
        if cls < 0:
            raise ParseError(f"{path}:{lineno}: negative class id {cls}")
        truth[(i, j, k)] = cls
    return truth


# ---------------------------------------------------------------------------
# flat key=value files (configs, manifests)
# ---------------------------------------------------------------------------

def parse_key_values(path) -> dict[str, str]:
    """Parse a flat key=value file; '#' starts a comment, blank lines ignored."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_key_values(path, entries: dict[str, object]) -> None:
    lines = [f"{k}={v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


_CONFIG_KEYS = ("resolution", "num_classes", "prior_alpha", "length_scale",
                "signal_scale", "weight_floor", "label_mode", "weighting")


def map_config_from_file(path) -> MapConfig:
    """Build a MapConfig from a flat key=value file mirroring its field names."""
    kv = parse_key_values(path)
    unknown = set(kv) - set(_CONFIG_KEYS)
    if unknown:
        raise ParseError(f"{path}: unknown config keys {sorted(unknown)}; "
                         f"valid keys are {list(_CONFIG_KEYS)}")
    kwargs = {}
    try:
        if "resolution" in kv:
            kwargs["resolution"] = float(kv["resolution"])
        if "num_classes" in kv:
            kwargs["num_classes"] = int(kv["num_classes"])
        if "prior_alpha" in kv:
            kwargs["prior_alpha"] = float(kv["prior_alpha"])
        if "weight_floor" in kv:
            kwargs["weight_floor"] = float(kv["weight_floor"])
        kernel_kwargs = {}
        if "length_scale" in kv:
            kernel_kwargs["length_scale"] = float(kv["length_scale"])
        if "signal_scale" in kv:
            kernel_kwargs["signal_scale"] = float(kv["signal_scale"])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if kernel_kwargs:
        kwargs["kernel"] = KernelParams(**kernel_kwargs)
    if "label_mode" in kv:
        kwargs["label_mode"] = kv["label_mode"]
    if "weighting" in kv:
        kwargs["weighting"] = kv["weighting"]
    try:
        return MapConfig(**kwargs)
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def map_config_entries(cfg: MapConfig) -> dict[str, object]:
    """MapConfig as the flat key=value entries used by config files and manifests."""
    return {
        "resolution": _fmt(cfg.resolution),
        "num_classes": cfg.num_classes,
        "prior_alpha": _fmt(cfg.prior_alpha),
        "length_scale": _fmt(cfg.kernel.length_scale),
        "signal_scale": _fmt(cfg.kernel.signal_scale),
        "weight_floor": _fmt(cfg.weight_floor),
        "label_mode": cfg.label_mode,
        "weighting": cfg.weighting,
    }
