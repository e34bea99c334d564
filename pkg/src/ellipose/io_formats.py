"""Versioned JSON file formats for scenes, cameras, annotations,
detections and localization results.

Floats are serialized by repr (shortest decimal that parses back to the
same double), so numeric fields survive save/load bit-exactly. Rotations
are stored as row-major 3x3 matrices: a quaternion encoding would be more
compact, but its matrix conversion is not exactly invertible in floating
point and would break the bit-exact round trip. On load, rotations that
are off orthonormal by more than 1e-9 (but at most 1e-6) are
re-orthonormalized with a warning; worse ones are rejected. Unknown
fields are rejected.
"""

import json
import warnings

import numpy as np

from .association import Detection, LocalizationResult
from .conic import BBox, Ellipse
from .errors import InvariantViolation, ParseError, SchemaMismatch
from .quadric import Camera, CameraIntrinsics, Ellipsoid, Pose
from .reconstruction import SceneModel, SceneObject
from .rotations import orthonormalize

FORMAT_VERSION = 1

KIND_SCENE = "scene"
KIND_CAMERAS = "cameras"
KIND_ANNOTATIONS = "annotations"
KIND_DETECTIONS = "detections"
KIND_RESULT = "result"


def _rot_rows(R):
    return [[float(v) for v in row] for row in np.asarray(R)]


def _check_keys(obj, required, optional=(), where="document"):
    if not isinstance(obj, dict):
        raise SchemaMismatch(f"{where}: expected an object")
    for key in required:
        if key not in obj:
            raise SchemaMismatch(f"{where}: missing field {key!r}")
    for key in obj:
        if key not in required and key not in optional:
            raise SchemaMismatch(
                f"{where}: unknown field {key!r} (format_version {FORMAT_VERSION})")


def _floats(value, n, where):
    if (not isinstance(value, list) or len(value) != n
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in value)):
        raise SchemaMismatch(f"{where}: expected a list of {n} numbers")
    return [float(v) for v in value]


def _number(value, where):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaMismatch(f"{where}: expected a number")
    return float(value)


def _string(value, where):
    if not isinstance(value, str):
        raise SchemaMismatch(f"{where}: expected a string")
    return value


def _load_quat(value, where):
    q = np.array(_floats(value, 4, where))
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) > 1e-6:
        raise InvariantViolation(f"{where}: quaternion norm {norm:.9f} is too "
                                 "far from 1")
    if abs(norm - 1.0) > 1e-12:
        warnings.warn(f"{where}: quaternion renormalized (norm {norm!r})")
        q = q / norm
    return quat_to_matrix(q)


def _dump(doc, path):
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(doc, fp, indent=1)
        fp.write("\n")


def _load(path, kind):
    try:
        with open(path, "r", encoding="utf-8") as fp:
            doc = json.load(fp)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg} at byte {exc.pos}",
                         offset=exc.pos) from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaMismatch(f"{path}: top level must be an object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaMismatch(f"{path}: unsupported format_version {version!r} "
                             f"(expected {FORMAT_VERSION})")
    if doc.get("kind") != kind:
        raise SchemaMismatch(f"{path}: expected kind {kind!r}, got "
                             f"{doc.get('kind')!r}")
    return doc


# --- scene files -----------------------------------------------------------

def save_scene(scene: SceneModel, path):
    doc = {"format_version": FORMAT_VERSION, "kind": KIND_SCENE, "objects": []}
    for obj in scene:
        e = obj.ellipsoid
        doc["objects"].append({
            "id": obj.id,
            "class": obj.class_label,
            "center": list(map(float, e.center)),
            "semi_axes": list(map(float, e.semi_axes)),
            "rotation_wxyz": list(map(float, _stable_quat(e.rotation))),
        })
    _dump(doc, path)


def load_scene(path) -> SceneModel:
    doc = _load(path, KIND_SCENE)
    _check_keys(doc, ("format_version", "kind", "objects"), where=str(path))
    if not isinstance(doc["objects"], list):
        raise SchemaMismatch(f"{path}: 'objects' must be a list")
    scene = SceneModel()
    for rec in doc["objects"]:
        _check_keys(rec, ("id", "class", "center", "semi_axes", "rotation_wxyz"),
                    where=f"{path}: object")
        oid = _string(rec["id"], f"{path}: object id")
        where = f"{path}: object {oid!r}"
        center = _floats(rec["center"], 3, where)
        axes = _floats(rec["semi_axes"], 3, where)
        R = _load_quat(rec["rotation_wxyz"], where)
        try:
            ellipsoid = Ellipsoid(center, axes, R)
        except ValueError as exc:
            raise InvariantViolation(f"{where}: {exc}") from exc
        try:
            scene.add(SceneObject(oid, _string(rec["class"], where), ellipsoid))
        except ValueError as exc:
            raise InvariantViolation(f"{where}: {exc}") from exc
    return scene


# --- camera files ----------------------------------------------------------

def save_cameras(cameras, path):
    """``cameras`` maps image ids to Camera records (world-to-camera pose)."""
    doc = {"format_version": FORMAT_VERSION, "kind": KIND_CAMERAS, "cameras": []}
    for image_id in sorted(cameras):
        cam = cameras[image_id]
        doc["cameras"].append({
            "id": image_id,
            "fx": cam.intrinsics.fx, "fy": cam.intrinsics.fy,
            "cx": cam.intrinsics.cx, "cy": cam.intrinsics.cy,
            "width": cam.width, "height": cam.height,
            "rotation_wxyz": list(map(float, _stable_quat(cam.pose.rotation))),
            "translation": list(map(float, cam.pose.translation)),
        })
    _dump(doc, path)


def load_cameras(path):
    doc = _load(path, KIND_CAMERAS)
    _check_keys(doc, ("format_version", "kind", "cameras"), where=str(path))
    if not isinstance(doc["cameras"], list):
        raise SchemaMismatch(f"{path}: 'cameras' must be a list")
    cameras = {}
    for rec in doc["cameras"]:
        _check_keys(rec, ("id", "fx", "fy", "cx", "cy", "width", "height",
                          "rotation_wxyz", "translation"),
                    where=f"{path}: camera")
        cam_id = _string(rec["id"], f"{path}: camera id")
        where = f"{path}: camera {cam_id!r}"
        if cam_id in cameras:
            raise InvariantViolation(f"{where}: duplicate camera id")
        try:
            intr = CameraIntrinsics(_number(rec["fx"], where), _number(rec["fy"], where),
                                    _number(rec["cx"], where), _number(rec["cy"], where))
            pose = Pose(_load_quat(rec["rotation_wxyz"], where),
                        _floats(rec["translation"], 3, where))
        except ValueError as exc:
            raise InvariantViolation(f"{where}: {exc}") from exc
        width = _number(rec["width"], where)
        height = _number(rec["height"], where)
        if width <= 0 or height <= 0 or width != int(width) or height != int(height):
            raise InvariantViolation(f"{where}: image size must be positive integers")
        cameras[cam_id] = Camera(intr, pose, int(width), int(height))
    return cameras


# --- annotation files ------------------------------------------------------

def save_annotations(annotations, path):
    """``annotations`` is an iterable of (image_id, BBox, label)."""
    doc = {"format_version": FORMAT_VERSION, "kind": KIND_ANNOTATIONS,
           "annotations": []}
    for image_id, box, label in annotations:
        doc["annotations"].append({
            "image_id": image_id,
            "bbox": [float(box.min_corner[0]), float(box.min_corner[1]),
                     float(box.max_corner[0]), float(box.max_corner[1])],
            "label": label,
        })
    _dump(doc, path)


def load_annotations(path):
    doc = _load(path, KIND_ANNOTATIONS)
    _check_keys(doc, ("format_version", "kind", "annotations"), where=str(path))
    if not isinstance(doc["annotations"], list):
        raise SchemaMismatch(f"{path}: 'annotations' must be a list")
    out = []
    for i, rec in enumerate(doc["annotations"]):
        where = f"{path}: annotation {i}"
        _check_keys(rec, ("image_id", "bbox", "label"), where=where)
        x0, y0, x1, y1 = _floats(rec["bbox"], 4, where)
        try:
            box = BBox([x0, y0], [x1, y1])
        except ValueError as exc:
            raise InvariantViolation(f"{where}: {exc}") from exc
        out.append((_string(rec["image_id"], where), box,
                    _string(rec["label"], where)))
    return out


# --- detection files -------------------------------------------------------

def _ellipse_record(obj_id, e: Ellipse):
    return {"object_id": obj_id,
            "center": list(map(float, e.center)),
            "semi_axes": list(map(float, e.semi_axes)),
            "theta": float(e.theta)}


def save_detections(detections, path):
    doc = {"format_version": FORMAT_VERSION, "kind": KIND_DETECTIONS,
           "detections": []}
    for det in detections:
        ellipses = [_ellipse_record(oid, det.ellipses[oid])
                    for oid in sorted(det.ellipses, key=lambda x: (x is not None, x))]
        doc["detections"].append({
            "bbox": [float(det.bbox.min_corner[0]), float(det.bbox.min_corner[1]),
                     float(det.bbox.max_corner[0]), float(det.bbox.max_corner[1])],
            "label": det.label,
            "score": float(det.score),
            "ellipses": ellipses,
        })
    _dump(doc, path)


def _load_ellipse(rec, where):
    _check_keys(rec, ("object_id", "center", "semi_axes", "theta"), where=where)
    oid = rec["object_id"]
    if oid is not None and not isinstance(oid, str):
        raise SchemaMismatch(f"{where}: object_id must be a string or null")
    center = _floats(rec["center"], 2, where)
    axes = _floats(rec["semi_axes"], 2, where)
    theta = _number(rec["theta"], where)
    try:
        return oid, Ellipse(center, axes, theta)
    except ValueError as exc:
        raise InvariantViolation(f"{where}: {exc}") from exc


def load_detections(path):
    doc = _load(path, KIND_DETECTIONS)
    _check_keys(doc, ("format_version", "kind", "detections"), where=str(path))
    if not isinstance(doc["detections"], list):
        raise SchemaMismatch(f"{path}: 'detections' must be a list")
    out = []
    for i, rec in enumerate(doc["detections"]):
        where = f"{path}: detection {i}"
        _check_keys(rec, ("bbox", "label", "score", "ellipses"), where=where)
        x0, y0, x1, y1 = _floats(rec["bbox"], 4, where)
        score = _number(rec["score"], where)
        if not isinstance(rec["ellipses"], list) or not rec["ellipses"]:
            raise SchemaMismatch(f"{where}: 'ellipses' must be a non-empty list")
        ellipses = {}
        for j, erec in enumerate(rec["ellipses"]):
            oid, ellipse = _load_ellipse(erec, f"{where}: ellipse {j}")
            if oid in ellipses:
                raise InvariantViolation(f"{where}: duplicate ellipse for {oid!r}")
            ellipses[oid] = ellipse
        try:
            out.append(Detection(BBox([x0, y0], [x1, y1]),
                                 _string(rec["label"], where), score, ellipses))
        except ValueError as exc:
            raise InvariantViolation(f"{where}: {exc}") from exc
    return out


# --- result files ----------------------------------------------------------

def save_result(result: LocalizationResult, path):
    doc = {
        "format_version": FORMAT_VERSION, "kind": KIND_RESULT,
        "solver": result.solver,
        "rotation_wxyz": list(map(float, _stable_quat(result.pose.rotation))),
        "translation": list(map(float, result.pose.translation)),
        "iou_threshold": float(result.iou_threshold),
        "minimal_set": [{"detection_index": int(i), "object_id": o}
                        for i, o in result.minimal_set],
        "associations": [{"detection_index": int(i), "object_id": o,
                          "iou": float(result.ious[i]),
                          "inlier": bool(i in result.inliers)}
                         for i, o in sorted(result.associations.items())],
    }
    _dump(doc, path)


def load_result(path) -> LocalizationResult:
    doc = _load(path, KIND_RESULT)
    _check_keys(doc, ("format_version", "kind", "solver", "rotation_wxyz",
                      "translation", "iou_threshold", "minimal_set",
                      "associations"), where=str(path))
    where = f"{path}: result"
    try:
        pose = Pose(_load_quat(doc["rotation_wxyz"], where),
                    _floats(doc["translation"], 3, where))
    except ValueError as exc:
        raise InvariantViolation(f"{where}: {exc}") from exc
    minimal = []
    for rec in doc["minimal_set"]:
        _check_keys(rec, ("detection_index", "object_id"), where=where)
        minimal.append((int(rec["detection_index"]), rec["object_id"]))
    associations, ious, inliers = {}, {}, {}
    for rec in doc["associations"]:
        _check_keys(rec, ("detection_index", "object_id", "iou", "inlier"),
                    where=where)
        idx = int(rec["detection_index"])
        associations[idx] = rec["object_id"]
        ious[idx] = _number(rec["iou"], where)
        if rec["inlier"]:
            inliers[idx] = rec["object_id"]
    try:
        return LocalizationResult(
            pose=pose, solver=_string(doc["solver"], where),
            minimal_set=tuple(minimal), associations=associations,
            ious=ious, inliers=inliers,
            iou_threshold=_number(doc["iou_threshold"], where))
    except ValueError as exc:
        raise InvariantViolation(f"{where}: {exc}") from exc
