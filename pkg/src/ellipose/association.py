"""Joint data association and pose estimation.

Class-consistent ellipse-ellipsoid matching hypotheses are enumerated,
solved with the minimal solver for their size (3 -> P3P on centers,
2 -> zero-roll P2E, 1 + known orientation -> position only) and scored by
object-wise IoU between each detected ellipse and the projection of its
hypothesized ellipsoid. The best pose by (inlier count, mean inlier IoU)
wins; everything is deterministic given the config seed.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .conic import BBox, Ellipse
from .errors import (BehindCamera, DegenerateConic, ElliposeError,
                     NotEnoughObjects, NoValidPose)
from .quadric import (CameraIntrinsics, Pose, ellipsoid_to_dual_quadric,
                      project_ellipsoid)
from .reconstruction import SceneModel
from .solvers import (Correspondence, p2e_zero_roll, p3p_centers,
                      position_from_orientation, refine_pose)

SOLVER_ORDER = {"p3p": 0, "p2e": 1, "position": 2}


@dataclass(frozen=True)
class Detection:
    """A labelled detection with one or more candidate ellipses.

    ``ellipses`` maps a scene object id to the ellipse predicted for that
    instance; the ``None`` key holds the instance-agnostic ellipse (e.g.
    the inscribed one). At least one entry is required.
    """

    bbox: BBox
    label: str
    score: float = 1.0
    ellipses: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.ellipses:
            raise ValueError("detection needs at least one candidate ellipse")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("detection score must be in [0, 1]")

    def ellipse_for(self, object_id):
        """Candidate ellipse bound to ``object_id`` (falls back to generic)."""
        if object_id in self.ellipses:
            return self.ellipses[object_id]
        return self.ellipses.get(None)


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 1000
    iou_threshold: float = 0.5
    seed: int = 0
    sweep_step: float = np.radians(0.1)
    refine: bool = True
    p2e_top_k: int = 32  # sweep candidates kept for full IoU scoring

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 < self.iou_threshold < 1.0:
            raise ValueError("iou_threshold must be in (0, 1)")


@dataclass
class LocalizationResult:
    """Best pose plus the associations that support it."""

    pose: Pose
    solver: str
    minimal_set: tuple          # ((det_index, object_id), ...) used by the solver
    associations: dict          # det_index -> object_id, all scored pairs
    ious: dict                  # det_index -> IoU under ``pose``
    inliers: dict               # det_index -> object_id with IoU >= threshold
    iou_threshold: float

    def __post_init__(self):
        for idx in self.inliers:
            if self.ious[idx] < self.iou_threshold:
                raise ValueError("inlier below the IoU threshold")

    @property
    def inlier_count(self):
        return len(self.inliers)

    @property
    def mean_inlier_iou(self):
        if not self.inliers:
            return 0.0
        return float(np.mean([self.ious[i] for i in self.inliers]))


def pose_object_iou(pose: Pose, ellipse: Ellipse, ellipsoid, k: CameraIntrinsics):
    """IoU between a detected ellipse and the projected ellipsoid; objects
    behind the camera (or degenerate projections) score 0."""
    try:
        projected = project_ellipsoid(ellipsoid, pose, k)
    except (BehindCamera, DegenerateConic):
        return 0.0
    return kernels.ellipse_iou(ellipse.params(), projected.params())


def score_pose(pose: Pose, pairs, k: CameraIntrinsics):
    """Per-object IoUs and their mean for (Ellipse, Ellipsoid) pairs."""
    ious = [pose_object_iou(pose, e, q, k) for e, q in pairs]
    return ious, (float(np.mean(ious)) if ious else 0.0)


def _pairable(detections, scene):
    """Per-detection list of class-consistent object ids with an ellipse."""
    out = []
    for det in detections:
        ids = [obj.id for obj in scene
               if obj.class_label == det.label and det.ellipse_for(obj.id) is not None]
        out.append(sorted(ids))
    return out


def enumerate_hypotheses(detections, scene: SceneModel, size=None):
    """All class-consistent minimal association sets, deterministically.

    A hypothesis is a tuple of (detection_index, object_id) pairs with
    distinct detections and distinct objects. ``size`` defaults to 3 when
    enough pairable detections exist, else 2 (the solvable minimum).
    Hypotheses are ordered by descending detection-score product, ties by
    enumeration order.
    """
    detections = list(detections)
    options = _pairable(detections, scene)
    usable = [i for i, ids in enumerate(options) if ids]
    if size is None:
        size = 3 if len(usable) >= 3 else 2
    if len(usable) < size:
        return []
    hyps = []
    for combo in itertools.combinations(usable, size):
        pools = [options[i] for i in combo]
        for assignment in itertools.product(*pools):
            if len(set(assignment)) != size:
                continue
            hyps.append(tuple(zip(combo, assignment)))
    scores = [float(np.prod([detections[i].score for i, _ in h])) for h in hyps]
    order = sorted(range(len(hyps)), key=lambda i: (-scores[i], i))
    return [hyps[i] for i in order]


def _solve_hypothesis(hyp, detections, scene, k, cfg):
    """Candidate poses for one hypothesis, cheapest-first pruned for P2E."""
    corr = [Correspondence(detections[i].ellipse_for(oid),
                           scene.get(oid).ellipsoid, oid)
            for i, oid in hyp]
    try:
        if len(hyp) == 3:
            return "p3p", p3p_centers(corr, k)
        candidates = p2e_zero_roll(corr, k, cfg.sweep_step)
    except ElliposeError:
        return None, []
    if len(candidates) > cfg.p2e_top_k:
        cost = _batch_param_cost(candidates, corr, k)
        keep = np.argsort(cost, kind="stable")[:cfg.p2e_top_k]
        candidates = [candidates[int(i)] for i in sorted(keep)]
    return "p2e", candidates


def _batch_param_cost(candidates, correspondences, k: CameraIntrinsics):
    """Cheap IoU-aligned ranking of many poses: squared differences of the
    projected ellipse parameters against the observed ones, vectorized over
    candidates (decomposition of C* in closed form per candidate)."""
    Km = k.matrix()
    R = np.stack([c.pose.rotation for c in candidates])
    t = np.stack([c.pose.translation for c in candidates])
    P = np.einsum("ij,njk->nik", Km, np.concatenate([R, t[:, :, None]], axis=2))
    cost = np.zeros(len(candidates))
    for corr in correspondences:
        Q = ellipsoid_to_dual_quadric(corr.ellipsoid).m
        C = np.einsum("nij,jk,nlk->nil", P, Q, P)
        w = -C[:, 2, 2]
        bad = np.abs(w) < 1e-12
        w[bad] = 1.0
        C = C / w[:, None, None]
        c = -C[:, :2, 2]
        B = C[:, :2, :2] + np.einsum("ni,nj->nij", c, c)
        half_tr = 0.5 * (B[:, 0, 0] + B[:, 1, 1])
        det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] ** 2
        root = np.sqrt(np.maximum(half_tr * half_tr - det, 0.0))
        lam1, lam2 = half_tr + root, half_tr - root
        bad |= lam2 <= 0.0
        a = np.sqrt(np.maximum(lam1, 0.0))
        b = np.sqrt(np.maximum(lam2, 0.0))
        theta = 0.5 * np.arctan2(2.0 * B[:, 0, 1], B[:, 0, 0] - B[:, 1, 1])
        p = corr.ellipse.params()
        dth = np.abs(theta - p[4])
        dth = np.minimum(dth, np.pi - dth)
        cost += ((c[:, 0] - p[0]) ** 2 + (c[:, 1] - p[1]) ** 2
                 + (a - p[2]) ** 2 + (b - p[3]) ** 2
                 + ((p[2] - p[3]) * dth) ** 2) / (p[2] * p[3])
        cost[bad] = np.inf
    return cost


def _score_candidate(pose, hyp, detections, scene, k, cfg):
    """Extend a minimal hypothesis to all detections and score it."""
    associations = dict(hyp)
    ious = {}
    for idx, oid in hyp:
        ious[idx] = pose_object_iou(pose, detections[idx].ellipse_for(oid),
                                    scene.get(oid).ellipsoid, k)
    used = set(associations.values())
    options = _pairable(detections, scene)
    for idx in range(len(detections)):
        if idx in associations:
            continue
        best = None
        for oid in options[idx]:
            if oid in used:
                continue
            iou = pose_object_iou(pose, detections[idx].ellipse_for(oid),
                                  scene.get(oid).ellipsoid, k)
            if iou >= cfg.iou_threshold and (best is None or iou > best[0]):
                best = (iou, oid)
        if best is not None:
            associations[idx] = best[1]
            ious[idx] = best[0]
            used.add(best[1])
    inliers = {i: o for i, o in associations.items()
               if ious[i] >= cfg.iou_threshold}
    return associations, ious, inliers


def _better(a, b):
    """Candidate ranking: inliers, mean inlier IoU, solver, hypothesis, root."""
    if a is None:
        return False
    if b is None:
        return True
    ka = (a["n_inliers"], a["mean_iou"], -a["solver_idx"], -a["hyp_idx"], -a["cand_idx"])
    kb = (b["n_inliers"], b["mean_iou"], -b["solver_idx"], -b["hyp_idx"], -b["cand_idx"])
    return ka > kb


def localize(detections, scene: SceneModel, k: CameraIntrinsics,
             cfg: RansacConfig = RansacConfig(), orientation=None) -> LocalizationResult:
    """Best pose and associations for a set of detections.

    Solver dispatch by the number of pairable detections: >= 3 tries P3P
    minimal sets (falling back to P2E pairs when no triple is fully
    inlying), exactly 2 uses P2E, and a single detection needs ``orientation``
    (world-to-camera rotation) for the position-only solver.

    Raises NotEnoughObjects (< 2 detections and no orientation) or
    NoValidPose (no hypothesis reached minimal-set inliers at the IoU
    threshold).
    """
    detections = list(detections)
    if not detections or (len(detections) < 2 and orientation is None):
        raise NotEnoughObjects(
            f"{len(detections)} detection(s) and no external orientation")

    rng = np.random.default_rng(cfg.seed)
    budget = cfg.max_iterations
    best = None
    evaluated = 0

    plans = []
    options = _pairable(detections, scene)
    n_usable = sum(1 for ids in options if ids)
    if n_usable >= 3:
        plans.append(3)
    if n_usable >= 2:
        plans.append(2)

    for size in plans:
        hyps = enumerate_hypotheses(detections, scene, size=size)
        if len(hyps) > budget:
            # sample beyond the budget reproducibly: keep the score order
            # for the first half, shuffle the tail for the rest
            head = hyps[:budget // 2]
            tail = hyps[budget // 2:]
            rng.shuffle(tail)
            hyps = head + tail[:budget - len(head)]
        for hyp_idx, hyp in enumerate(hyps):
            if evaluated >= budget and best is not None:
                break
            solver, candidates = _solve_hypothesis(hyp, detections, scene, k, cfg)
            if solver is None:
                continue
            evaluated += 1
            for cand_idx, cand in enumerate(candidates):
                associations, ious, inliers = _score_candidate(
                    cand.pose, hyp, detections, scene, k, cfg)
                entry = {
                    "pose": cand.pose, "solver": solver, "hyp": hyp,
                    "associations": associations, "ious": ious,
                    "inliers": inliers, "n_inliers": len(inliers),
                    "mean_iou": (float(np.mean([ious[i] for i in inliers]))
                                 if inliers else 0.0),
                    "solver_idx": SOLVER_ORDER[solver],
                    "hyp_idx": hyp_idx, "cand_idx": cand_idx,
                }
                if _better(entry, best):
                    best = entry
        if best is not None and best["n_inliers"] >= size:
            break  # this tier produced a fully inlying minimal set

    if best is None and orientation is not None:
        best = _localize_single(detections, scene, k, cfg, orientation)

    if best is None or best["n_inliers"] < len(best["hyp"]):
        raise NoValidPose("no hypothesis reached minimal-set inliers "
                          f"at IoU >= {cfg.iou_threshold}")

    pose = best["pose"]
    if cfg.refine and best["solver"] != "position" and best["n_inliers"] >= 2:
        pairs = [Correspondence(detections[i].ellipse_for(o),
                                scene.get(o).ellipsoid, o)
                 for i, o in sorted(best["inliers"].items())]
        refined = refine_pose(pose, pairs, k)
        associations, ious, inliers = _score_candidate(refined, best["hyp"],
                                                       detections, scene, k, cfg)
        if len(inliers) >= best["n_inliers"]:
            pose = refined
            best["associations"] = associations
            best["ious"], best["inliers"] = ious, inliers

    return LocalizationResult(
        pose=pose, solver=best["solver"], minimal_set=tuple(best["hyp"]),
        associations=dict(sorted(best["associations"].items())),
        ious={i: best["ious"][i] for i in sorted(best["ious"])},
        inliers=dict(sorted(best["inliers"].items())),
        iou_threshold=cfg.iou_threshold)


def _localize_single(detections, scene, k, cfg, orientation):
    """Position-only hypotheses: one detection against each same-class object."""
    best = None
    options = _pairable(detections, scene)
    hyp_idx = 0
    for idx in range(len(detections)):
        for oid in options[idx]:
            corr = Correspondence(detections[idx].ellipse_for(oid),
                                  scene.get(oid).ellipsoid, oid)
            try:
                pose = position_from_orientation(corr, orientation, k)
            except ElliposeError:
                hyp_idx += 1
                continue
            hyp = ((idx, oid),)
            associations, ious, inliers = _score_candidate(
                pose, hyp, detections, scene, k, cfg)
            entry = {
                "pose": pose, "solver": "position", "hyp": hyp,
                "associations": associations, "ious": ious,
                "inliers": inliers, "n_inliers": len(inliers),
                "mean_iou": (float(np.mean([ious[i] for i in inliers]))
                             if inliers else 0.0),
                "solver_idx": SOLVER_ORDER["position"],
                "hyp_idx": hyp_idx, "cand_idx": 0,
            }
            if _better(entry, best):
                best = entry
            hyp_idx += 1
    return best
