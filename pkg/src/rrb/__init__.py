"""Render-and-compare pose recovery of a known mesh from a single silhouette.

The pipeline renders a soft silhouette of a triangle mesh, compares it with a
reference mask under a Huber loss and refines azimuth, elevation and camera
center with hand-derived gradients. Scale fitting from a 2D box, chained
egomotion over a mask sequence and the usual pose and trajectory metrics sit
on top.
"""
from importlib import resources

from .camera import (Box2, CameraIntrinsics, PoseParams, bounding_box_2d, look_at_pose,
                     mask_bounding_box, project, rotation_from_view, wrap_angle)
from .egomotion import (EgomotionResult, Trajectory, TrajectoryError, ate, camera_box_iou,
                        camera_center_positions, estimate_trajectory, pose_errors, rigid_align, rpe)
from .errors import ConfigError, DataError, NumericalError, RRBError
from .mesh import (Box3, TriangleMesh, bounding_box_3d, iou_3d, load_obj, read_obj, scale_mesh,
                   serialize_obj, transform_from_camera, transform_to_camera, write_obj)
from .optimize import (OptimizationTrace, OptimizerOptions, huber_loss, loss_and_grad,
                       optimize_pose, perturb_pose)
from .raster import (PoseGradient, RenderConfig, hard_rasterize, render_backward, render_hard,
                     render_silhouette, signed_distance_2d)
from .scale import ScaleFit, infer_scale, mask_extent

__version__ = "0.1.0"


def data_path(name: str) -> str:
    """Filesystem path of a bundled file (cube.obj, chair.obj, camera64.txt, desk64.txt)."""
    return str(resources.files(__name__).joinpath("data", name))


__all__ = [
    "Box2", "Box3", "CameraIntrinsics", "ConfigError", "DataError", "EgomotionResult",
    "NumericalError", "OptimizationTrace", "OptimizerOptions", "PoseGradient", "PoseParams",
    "RRBError", "RenderConfig", "ScaleFit", "Trajectory", "TrajectoryError", "TriangleMesh",
    "ate", "bounding_box_2d", "bounding_box_3d", "camera_box_iou", "camera_center_positions", "data_path",
    "estimate_trajectory", "hard_rasterize", "huber_loss", "infer_scale", "iou_3d",
    "load_obj", "look_at_pose", "loss_and_grad", "mask_bounding_box", "mask_extent", "optimize_pose",
    "perturb_pose", "pose_errors", "project", "read_obj", "render_backward", "render_hard",
    "render_silhouette", "rigid_align", "rotation_from_view", "rpe", "scale_mesh",
    "serialize_obj", "signed_distance_2d", "transform_from_camera", "transform_to_camera",
    "wrap_angle", "write_obj",
]
