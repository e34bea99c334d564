"""Command-line interface.

Subcommands: reconstruct, localize, evaluate, sweep-center-gap,
noise-study, deform-study, loss-check. Experiment commands are
deterministic given --seed (default from ELLIPOSE_SEED, else 0) and write
plot-ready CSV ('.' decimals, header row); each prints a one-line
PASS/FAIL summary against its acceptance threshold.

Exit codes: 0 ok, 1 internal error, 2 input/schema error, 3 insufficient
objects, 4 no valid pose. Failures end with a machine-parseable
``error_code=<n> error=<name>`` line on stdout.
"""

import argparse
import csv
import os
import sys

import numpy as np

from . import experiments, io_formats, simulate
from .association import RansacConfig, localize
from .conic import ellipse_iou
from .errors import (ElliposeError, InvariantViolation, NotEnoughObjects,
                     NoValidPose, ParseError, SceneBuildError, SchemaMismatch)
from .reconstruction import build_scene, reproject_annotations
from .rotations import matrix_to_quat, quat_to_matrix

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_NOT_ENOUGH_OBJECTS = 3
EXIT_NO_VALID_POSE = 4


class _CliFailure(Exception):
    def __init__(self, code, name, message):
        super().__init__(message)
        self.code = code
        self.name = name


def _csv_cell(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, fieldnames, rows):
    with open(path, "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_csv_cell(row[name]) for name in fieldnames])


def _default_seed():
    return int(os.environ.get("ELLIPOSE_SEED", "0"))


def _print_pass(ok, name, detail):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok


# --- subcommands -------------------------------------------------------------

def cmd_reconstruct(args):
    annotations = io_formats.load_annotations(args.annotations)
    cameras = io_formats.load_cameras(args.cameras)
    if not annotations:
        print("warning: empty annotation list; writing an empty scene")
        io_formats.save_scene(build_scene([], cameras), args.out)
        return EXIT_OK
    try:
        scene = build_scene(annotations, cameras)
    except SceneBuildError as exc:
        for label, err in sorted(exc.failures.items()):
            print(f"label {label!r}: {type(err).__name__}: {err}")
        raise
    io_formats.save_scene(scene, args.out)
    # reprojection report: IoU between each input ellipse and the rebuilt model
    from .conic import inscribed_ellipse
    reprojected, _ = reproject_annotations(scene, cameras)
    lookup = {(img, label): e for img, label, e in reprojected}
    print("label image reprojection_iou")
    for image_id, box, label in annotations:
        reproj = lookup.get((image_id, label))
        iou = ellipse_iou(inscribed_ellipse(box), reproj) if reproj else 0.0
        print(f"{label} {image_id} {iou:.4f}")
    print(f"scene with {len(scene)} object(s) written to {args.out}")
    return EXIT_OK


def cmd_localize(args):
    scene = io_formats.load_scene(args.scene)
    detections = io_formats.load_detections(args.detections)
    cameras = io_formats.load_cameras(args.camera)
    if args.camera_id is not None:
        if args.camera_id not in cameras:
            raise SchemaMismatch(f"camera id {args.camera_id!r} not in {args.camera}")
        cam = cameras[args.camera_id]
    elif len(cameras) == 1:
        cam = next(iter(cameras.values()))
    else:
        raise SchemaMismatch("camera file has several cameras; pass --camera-id")
    orientation = None
    if args.orientation:
        parts = [float(v) for v in args.orientation.split(",")]
        if len(parts) != 4:
            raise SchemaMismatch("--orientation expects w,x,y,z")
        orientation = quat_to_matrix(np.array(parts))
    cfg = RansacConfig(max_iterations=args.max_iterations,
                       iou_threshold=args.iou_threshold,
                       seed=args.seed, refine=not args.no_refine)
    result = localize(detections, scene, cam.intrinsics, cfg, orientation)
    q = matrix_to_quat(result.pose.rotation)
    t = result.pose.translation
    c = result.pose.camera_center
    print(f"solver: {result.solver}")
    print(f"rotation_wxyz: {q[0]!r} {q[1]!r} {q[2]!r} {q[3]!r}")
    print(f"translation: {t[0]!r} {t[1]!r} {t[2]!r}")
    print(f"camera_center: {c[0]!r} {c[1]!r} {c[2]!r}")
    for idx in sorted(result.associations):
        tag = "inlier" if idx in result.inliers else "outlier"
        print(f"detection {idx} -> {result.associations[idx]} "
              f"iou {result.ious[idx]:.4f} ({tag})")
    if args.out:
        io_formats.save_result(result, args.out)
        print(f"result written to {args.out}")
    return EXIT_OK


def cmd_evaluate(args):
    rows, summary = experiments.localization_trials(
        args.seed, args.trials, mode=args.mode,
        duplicate_classes=args.duplicate_classes, spurious=args.spurious)
    fields = ["frame", "pos_err_m", "rot_err_deg", "valid", "n_detected",
              "solver", "association_correct"]
    write_csv(args.out, fields, rows)
    print(f"{args.trials} trials -> {args.out}")
    print(f"median_pos_err_m={summary['median_pos_err_m']!r} "
          f"median_rot_err_deg={summary['median_rot_err_deg']!r} "
          f"valid_rate={summary['valid_rate']!r} "
          f"association_rate={summary['association_rate']!r}")
    if args.mode == simulate.MODE_TRUE:
        worst_pos = max(r["pos_err_m"] for r in rows)
        worst_rot = max(r["rot_err_deg"] for r in rows)
        ok = (worst_pos < 1e-6 and worst_rot < 1e-6
              and summary["association_rate"] == 1.0)
        _print_pass(ok, "evaluate", f"worst errors {worst_pos:.3g} m / "
                    f"{worst_rot:.3g} deg vs 1e-6 bounds, association rate "
                    f"{summary['association_rate']:.3f}")
        return EXIT_OK if ok else EXIT_INTERNAL
    _print_pass(summary["valid_rate"] >= 0.9, "evaluate",
                f"valid rate {summary['valid_rate']:.3f} (>= 0.9)")
    return EXIT_OK


def cmd_sweep_center_gap(args):
    sizes = tuple(float(v) for v in args.sizes.split(","))
    distances = tuple(float(v) for v in args.distances.split(","))
    rows = simulate.center_gap_sweep(sizes=sizes, distances=distances)
    write_csv(args.out, ["azimuth_deg", "distance_m", "gap_px", "in_fov"], rows)
    in_fov = [r for r in rows if r["in_fov"] and r["distance_m"] >= 1.0]
    worst = max(r["gap_px"] for r in in_fov)
    monotone = True
    for dist in distances:
        gaps = [r["gap_px"] for r in rows if r["distance_m"] == dist]
        monotone &= all(a <= b + 1e-12 for a, b in zip(gaps, gaps[1:]))
    ok = worst < 5.0 and monotone
    _print_pass(ok, "sweep-center-gap",
                f"max in-FOV gap {worst:.3f} px (< 5 px), monotone in "
                f"azimuth: {monotone}")
    print(f"{len(rows)} cells -> {args.out}")
    return EXIT_OK if ok else EXIT_INTERNAL


def cmd_noise_study(args):
    half_ranges = tuple(float(v) for v in args.half_ranges.split(","))
    rows, summary = experiments.noise_study(args.seed, half_ranges, args.trials)
    write_csv(args.out, ["half_range_px", "n_trials", "median_pos_err_m",
                         "median_rot_err_deg", "valid_rate"], rows)
    ok = summary["monotone_pos"] and summary["monotone_rot"]
    _print_pass(ok, "noise-study",
                f"median errors monotone in noise: pos={summary['monotone_pos']} "
                f"rot={summary['monotone_rot']}")
    print(f"{len(rows)} levels -> {args.out}")
    return EXIT_OK if ok else EXIT_INTERNAL


def cmd_deform_study(args):
    rows, summary = experiments.deform_study(args.seed, args.magnitude,
                                             args.trials)
    write_csv(args.out, ["trial", "pos_err_original_m", "rot_err_original_deg",
                         "pos_err_deformed_m", "rot_err_deformed_deg"], rows)
    ratio = summary["median_ratio"]
    ok = 0.5 <= ratio <= 2.0
    _print_pass(ok, "deform-study",
                f"median pos error ratio deformed/original {ratio:.3f} "
                f"(in [0.5, 2])")
    print(f"{len(rows)} trials -> {args.out}")
    return EXIT_OK if ok else EXIT_INTERNAL


def cmd_loss_check(args):
    rows, summary = experiments.gradient_check(args.seed, args.pairs)
    write_csv(args.out, ["variant", "n_checked", "n_excluded", "max_rel_err",
                         "mean_rel_err"], rows)
    ok = summary["max_rel_err"] < 1e-5
    _print_pass(ok, "loss-check",
                f"max relative gradient error {summary['max_rel_err']:.3g} "
                f"(< 1e-5) over {sum(r['n_checked'] for r in rows)} checks")
    print(f"{len(rows)} variants -> {args.out}")
    return EXIT_OK if ok else EXIT_INTERNAL


# --- parser ------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="ellipose",
        description="Object-based camera pose estimation from an ellipsoid "
                    "cloud scene model.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct",
                       help="build an ellipsoid scene model from annotations")
    p.add_argument("--annotations", required=True)
    p.add_argument("--cameras", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("localize", help="estimate the camera pose of a query")
    p.add_argument("--scene", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--camera-id", default=None)
    p.add_argument("--orientation", default=None,
                   help="known world-to-camera rotation as quaternion w,x,y,z")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out", default=None, help="optional result file")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("evaluate", help="end-to-end synthetic localization run")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--mode", choices=simulate.RENDER_MODES,
                   default=simulate.MODE_TRUE)
    p.add_argument("--duplicate-classes", type=int, default=2)
    p.add_argument("--spurious", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-center-gap",
                       help="projected-center approximation study")
    p.add_argument("--sizes", default="0.30,0.20,0.15",
                   help="full axis extents in meters")
    p.add_argument("--distances", default="1.0,1.5,2.0,3.0,4.0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_center_gap)

    p = sub.add_parser("noise-study", help="bounding-box corner noise study")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--half-ranges", default="0,2,4,8,16")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_noise_study)

    p = sub.add_parser("deform-study", help="model deformation invariance study")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--magnitude", type=float, default=0.3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_deform_study)

    p = sub.add_parser("loss-check", help="per-variant gradient verification")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_loss_check)

    return parser


_ERROR_CODES = (
    (NotEnoughObjects, EXIT_NOT_ENOUGH_OBJECTS, "not_enough_objects"),
    (NoValidPose, EXIT_NO_VALID_POSE, "no_valid_pose"),
    (ParseError, EXIT_INPUT, "parse_error"),
    (SchemaMismatch, EXIT_INPUT, "schema_mismatch"),
    (InvariantViolation, EXIT_INPUT, "invariant_violation"),
    (SceneBuildError, EXIT_INPUT, "scene_build_error"),
    (FileNotFoundError, EXIT_INPUT, "file_not_found"),
)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single exit point for error codes
        for klass, code, name in _ERROR_CODES:
            if isinstance(exc, klass):
                print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
                print(f"error_code={code} error={name}")
                return code
        if isinstance(exc, ElliposeError):
            print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
            print(f"error_code={EXIT_INTERNAL} error=internal")
            return EXIT_INTERNAL
        raise


if __name__ == "__main__":
    sys.exit(main())
