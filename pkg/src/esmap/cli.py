"""Command-line interface: build, eval, query, synth, ablate.

Batch-style commands for scripts and test harnesses. Output on stdout is
flat key=value text; every command records a manifest sufficient to
reproduce its outputs. Exit codes are a stable contract: 0 success,
1 validation or parse failure, 2 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from pathlib import Path

from .errors import ParseError, ValidationError
from . import formats
from .geometry import transform_points
from .kernel import KernelParams
from .mapping import LABEL_MODES, WEIGHTINGS, MapConfig, VoxelMap
from .metrics import MetricsReport, evaluate
from .synthetic import SyntheticScene, SyntheticSceneSpec, generate_synthetic, write_dataset

SWEEPABLE = ("weighting", "label_mode", "length_scale", "resolution", "w_min", "noise_rate")


def _metric_entries(report: MetricsReport) -> dict[str, object]:
    entries: dict[str, object] = {
        "evaluated_voxels": report.evaluated_voxels,
        "overall_accuracy": repr(report.overall_accuracy),
        "miou": repr(report.miou),
    }
    for c in report.present_classes():
        entries[f"iou_{c}"] = repr(float(report.per_class_iou[c]))
    absent = [str(c) for c in range(len(report.per_class_iou))
              if c not in report.present_classes()]
    if absent:
        entries["absent_classes"] = ",".join(absent)
    return entries


def _print_entries(entries: dict[str, object]) -> None:
    for key, value in entries.items():
        print(f"{key}={value}")


def _scan_files(scan_dir: Path) -> list[Path]:
    if not scan_dir.is_dir():
        raise ValidationError(f"scan directory {scan_dir} does not exist")
    return sorted(scan_dir.glob("*.esm"))


def _build_map(config: MapConfig, scans_with_poses) -> VoxelMap:
    vmap = VoxelMap(config)
    for points, pose in scans_with_poses:
        vmap.update_scan(transform_points(pose, points))
    return vmap


def cmd_build(args) -> int:
    start = time.perf_counter()
    config = formats.map_config_from_file(args.config)
    scan_files = _scan_files(Path(args.scans))
    poses = formats.read_poses(args.poses)
    if len(poses) != len(scan_files):
        raise ValidationError(f"{len(scan_files)} scan files but {len(poses)} poses; "
                              f"pose line n pairs with the n-th scan in filename order")

    vmap = VoxelMap(config)
    for scan_path, pose in zip(scan_files, poses):
        points, k = formats.read_scan(scan_path)
        if k != config.num_classes:
            raise ValidationError(f"{scan_path}: scan declares K={k} but config has "
                                  f"K={config.num_classes}")
        vmap.update_scan(transform_points(pose, points))

    out = Path(args.out)
    tmp = out.with_name(out.name + ".tmp")
    try:
        formats.serialize_map(vmap, tmp)
        os.replace(tmp, out)
    finally:
        tmp.unlink(missing_ok=True)

    duration = time.perf_counter() - start
    manifest = {"command": "build", "scans": args.scans, "poses": args.poses,
                "config": args.config, "out": str(out),
                **formats.map_config_entries(config),
                "num_scans": len(scan_files), "voxels": len(vmap),
                "duration_s": f"{duration:.3f}"}
    formats.write_key_values(args.manifest or f"{out}.manifest", manifest)
    print(f"map={out}")
    print(f"voxels={len(vmap)}")
    return 0


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValidationError(f"expected a boolean (true/false), got {text!r}")


def cmd_eval(args) -> int:
    start = time.perf_counter()
    vmap = formats.deserialize_map(args.map)
    truth = formats.read_ground_truth(args.truth)
    include = _parse_bool(args.include_unobserved)
    report = evaluate(vmap, truth, include_unobserved=include)
    duration = time.perf_counter() - start
    entries = {"command": "eval", "map": args.map, "truth": args.truth,
               "include_unobserved": str(include).lower(),
               **_metric_entries(report), "duration_s": f"{duration:.3f}"}
    _print_entries(entries)
    if args.manifest:
        formats.write_key_values(args.manifest, entries)
    return 0


def cmd_query(args) -> int:
    vmap = formats.deserialize_map(args.map)
    tokens = args.point.split(",")
    if len(tokens) != 3:
        raise ValidationError(f"point must be 'x,y,z', got {args.point!r}")
    try:
        position = [float(t) for t in tokens]
    except ValueError:
        raise ValidationError(f"point coordinates must be numbers: {args.point!r}") from None
    q = vmap.query_point(position)
    probs = ",".join(f"{p:.6f}" for p in q.probs)
    print(f"class={q.class_id} probs={probs} vacuity={q.map_vacuity:.6f}")
    return 0


def cmd_synth(args) -> int:
    start = time.perf_counter()
    spec = SyntheticSceneSpec.from_file(args.spec)
    scene = generate_synthetic(spec)
    outdir = Path(args.out)
    write_dataset(scene, outdir)
    duration = time.perf_counter() - start
    manifest = {"command": "synth", "spec": args.spec, "out": str(outdir),
                **spec.entries(),
                "ground_truth_voxels": len(scene.ground_truth),
                "duration_s": f"{duration:.3f}"}
    formats.write_key_values(outdir / "manifest.txt", manifest)
    print(f"out={outdir}")
    print(f"scans={spec.num_scans}")
    print(f"ground_truth_voxels={len(scene.ground_truth)}")
    return 0


def base_map_config(spec: SyntheticSceneSpec) -> MapConfig:
    """Map configuration matched to a synthetic scene.

    The kernel support is set to 0.6 * resolution so each point's support
    covers its own voxel center but no neighboring one (see synthetic
    module geometry note).
    """
    return MapConfig(resolution=spec.resolution, num_classes=spec.num_classes,
                     prior_alpha=0.001,
                     kernel=KernelParams(length_scale=0.6 * spec.resolution),
                     weight_floor=0.0, label_mode="hard_onehot",
                     weighting="one_minus_vacuity")


def _parse_sweep(sweep: str) -> tuple[str, list[str]]:
    if "=" not in sweep:
        raise ValidationError(f"--sweep must look like PARAM=v1,v2,..., got {sweep!r}")
    param, _, rest = sweep.partition("=")
    param = param.strip()
    if param not in SWEEPABLE:
        raise ValidationError(f"unknown sweep parameter {param!r}; valid parameters: "
                              f"{', '.join(SWEEPABLE)}")
    values = [v.strip() for v in rest.split(",") if v.strip()]
    if not values:
        raise ValidationError(f"--sweep {param} has no values")
    return param, values


def _apply_sweep_value(param: str, value: str, spec: SyntheticSceneSpec,
                       config: MapConfig) -> tuple[SyntheticSceneSpec, MapConfig]:
    def as_float(v):
        try:
            return float(v)
        except ValueError:
            raise ValidationError(f"sweep value for {param} must be a number, "
                                  f"got {v!r}") from None

    if param == "weighting":
        if value not in WEIGHTINGS:
            raise ValidationError(f"weighting must be one of {WEIGHTINGS}, got {value!r}")
        return spec, dataclasses.replace(config, weighting=value)
    if param == "label_mode":
        if value not in LABEL_MODES:
            raise ValidationError(f"label_mode must be one of {LABEL_MODES}, got {value!r}")
        return spec, dataclasses.replace(config, label_mode=value)
    if param == "length_scale":
        kernel = KernelParams(length_scale=as_float(value),
                              signal_scale=config.kernel.signal_scale)
        return spec, dataclasses.replace(config, kernel=kernel)
    if param == "w_min":
        return spec, dataclasses.replace(config, weight_floor=as_float(value))
    if param == "resolution":
        new_spec = dataclasses.replace(spec, resolution=as_float(value))
        return new_spec, dataclasses.replace(base_map_config(new_spec),
                                             weighting=config.weighting,
                                             label_mode=config.label_mode)
    if param == "noise_rate":
        return dataclasses.replace(spec, noise_rate=as_float(value)), config
    raise ValidationError(f"unknown sweep parameter {param!r}")


def cmd_ablate(args) -> int:
    start = time.perf_counter()
    base_spec = SyntheticSceneSpec.from_file(args.spec)
    param, values = _parse_sweep(args.sweep)

    scene_cache: dict[SyntheticSceneSpec, SyntheticScene] = {}
    rows = []
    for value in values:
        row_start = time.perf_counter()
        spec, config = _apply_sweep_value(param, value, base_spec,
                                          base_map_config(base_spec))
        scene = scene_cache.get(spec)
        if scene is None:
            scene = generate_synthetic(spec)
            scene_cache[spec] = scene
        vmap = _build_map(config, scene.scans)
        report = evaluate(vmap, scene.ground_truth)
        rows.append((value, report.overall_accuracy, report.miou,
                     time.perf_counter() - row_start))

    out = Path(args.out)
    lines = ["param,accuracy,miou,duration_s"]
    for value, acc, miou, dur in rows:
        lines.append(f"{value},{acc!r},{miou!r},{dur:.3f}")
    out.write_text("\n".join(lines) + "\n")

    from .report import render_sweep_figure
    figure = render_sweep_figure(rows, param, out.with_suffix(".png"))

    duration = time.perf_counter() - start
    manifest = {"command": "ablate", "spec": args.spec, "sweep": args.sweep,
                "out": str(out), "figure": str(figure), **base_spec.entries(),
                "duration_s": f"{duration:.3f}"}
    formats.write_key_values(args.manifest or f"{out}.manifest", manifest)
    print(f"out={out}")
    print(f"figure={figure}")
    print(f"rows={len(rows)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esmap",
        description="Evidential semantic voxel mapping: build maps from "
                    "evidential scans, evaluate them, and run synthetic "
                    "robustness studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="accumulate scans into a serialized map")
    p.add_argument("--scans", required=True,
                   help="directory of *.esm scan files, read in lexicographic order")
    p.add_argument("--poses", required=True,
                   help="pose file; line n pairs with the n-th scan")
    p.add_argument("--config", required=True, help="flat key=value map config")
    p.add_argument("--out", required=True, help="output map path")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="score a map against ground-truth voxel labels")
    p.add_argument("--map", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--include-unobserved", default="true",
                   help="count ground-truth voxels missing from the map as "
                        "predicted-prior (default true)")
    p.add_argument("--manifest", help="also write the report to this path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("query", help="query the map at a world position")
    p.add_argument("--map", required=True)
    p.add_argument("--point", required=True, help='world position as "x,y,z"')
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--spec", required=True, help="flat key=value scene spec")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablate", help="sweep one parameter, emit CSV and figure")
    p.add_argument("--spec", required=True, help="flat key=value scene spec")
    p.add_argument("--sweep", required=True, metavar="PARAM=v1,v2,...",
                   help=f"parameter to sweep; one of {', '.join(SWEEPABLE)}")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest)")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors; usage errors are
        # validation failures under the 0/1/2 contract
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ValidationError, ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
