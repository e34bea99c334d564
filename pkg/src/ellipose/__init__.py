"""ellipose: camera pose estimation from an ellipsoid-cloud scene model.

Objects are abstracted as ellipsoids (dual quadrics); detections as image
ellipses (dual conics, C* = P Q* P^T under projection). The package covers
conic/quadric algebra, multi-view ellipsoid reconstruction, minimal pose
solvers with RANSAC-based object association, a sampled embedding-function
ellipse loss with analytic gradients, and a synthetic desk-scale study
harness with a CLI.
"""

from .association import (Detection, LocalizationResult, RansacConfig,
                          enumerate_hypotheses, localize, score_pose)
from .conic import (BBox, DualConic, Ellipse, dual_conic_to_ellipse,
                    ellipse_bbox, ellipse_iou, ellipse_to_dual_conic,
                    inscribed_ellipse)
from .errors import (BehindCamera, DegenerateConfiguration, DegenerateConic,
                     ElliposeError, EmptyPointSet, InsufficientViews,
                     InvariantViolation, NonConvergence, NoSolution,
                     NotAnEllipsoid, NotEnoughObjects, NoValidPose,
                     ParseError, SceneBuildError, SchemaMismatch)
from .loss import (CropFrame, EmbeddingVariant, SamplingGrid,
                   denormalize_from_crop, embed, loss, loss_gradient,
                   normalize_to_crop)
from .metrics import (PoseError, accuracy_curve, add_error, pose_error,
                      reprojection_error, valid_pose)
from .quadric import (Camera, CameraIntrinsics, DualQuadric, Ellipsoid, Pose,
                      center_gap, dual_quadric_to_ellipsoid,
                      ellipsoid_to_dual_quadric, project_ellipsoid,
                      project_point)
from .reconstruction import (Observation, SceneModel, SceneObject,
                             build_scene, reconstruct_ellipsoid,
                             reproject_annotations)
from .solvers import (Correspondence, PoseCandidate, p2e_zero_roll,
                      p3p_centers, position_from_orientation, refine_pose)

__version__ = "0.1.0"
