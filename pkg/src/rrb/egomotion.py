"""Object-centric egomotion by chained pose refinement, and trajectory metrics.

Every pose is expressed in the object's frame, so the camera center of a
frame is simply its translation ``c``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .camera import CameraIntrinsics, PoseParams, wrap_angle
from .errors import (DataError, FrameMismatchError, NumericalError,
                     TrajectoryTooShortError)
from .mesh import TriangleMesh, bounding_box_3d, iou_3d, transform_to_camera
from .optimize import DIVERGED, OptimizationTrace, OptimizerOptions, optimize_pose
from .raster import RenderConfig
from .scale import infer_scale, mask_extent


@dataclass(frozen=True)
class Trajectory:
    frame_ids: tuple[int, ...]
    poses: tuple[PoseParams, ...]

    def __post_init__(self):
        ids = tuple(int(i) for i in self.frame_ids)
        poses = tuple(self.poses)
        if not ids:
            raise DataError("trajectory is empty")
        if len(ids) != len(poses):
            raise DataError(f"{len(ids)} frame ids for {len(poses)} poses")
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise DataError("frame ids must be strictly increasing")
        object.__setattr__(self, "frame_ids", ids)
        object.__setattr__(self, "poses", poses)

    def __len__(self):
        return len(self.frame_ids)

    def __iter__(self):
        return iter(zip(self.frame_ids, self.poses))


@dataclass(frozen=True)
class TrajectoryError:
    """RMSE summaries and the residuals behind them; unset metrics are None."""

    ate_rmse: float | None = None
    rpe_rmse: float | None = None
    ate_residuals: np.ndarray | None = None
    rpe_residuals: np.ndarray | None = None


class EgomotionDivergedError(NumericalError):
    def __init__(self, frame_id, message=""):
        self.frame_id = frame_id
        super().__init__(f"frame {frame_id}: optimization diverged {message}".rstrip())


@dataclass
class EgomotionResult:
    trajectory: Trajectory
    scale: float = 1.0
    failed_frame: int | None = None
    message: str = ""
    traces: list[OptimizationTrace] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failed_frame is None


def estimate_trajectory(masks, mesh: TriangleMesh, K: CameraIntrinsics, init0: PoseParams,
                        cfg: RenderConfig = RenderConfig(), opts: OptimizerOptions = OptimizerOptions(),
                        frame_ids=None, fit_scale: bool = False, ref_box0=None) -> EgomotionResult:
    """Refine every frame, seeding each with the previous frame's result.

    With ``fit_scale`` the mesh scale is inferred once on frame 0 (from
    ``ref_box0`` or the mask's pixel-edge box) and then held. If a frame diverges the
    trajectory stops at the last good frame and ``failed_frame`` names the
    culprit; divergence on the very first frame raises.
    """
    masks = list(masks)
    if not masks:
        raise DataError("no frames")
    ids = list(range(len(masks))) if frame_ids is None else [int(i) for i in frame_ids]
    if len(ids) != len(masks):
        raise DataError(f"{len(ids)} frame ids for {len(masks)} masks")
    scale = 1.0
    if fit_scale:
        box = ref_box0 if ref_box0 is not None else mask_extent(masks[0])
        scale, mesh = infer_scale(mesh, init0, K, box, z_near=cfg.z_near)

    poses, traces = [], []
    pose = init0
    for fid, mask in zip(ids, masks):
        est, trace = optimize_pose(mesh, pose, K, mask, cfg, opts)
        traces.append(trace)
        if trace.status == DIVERGED:
            if not poses:
                raise EgomotionDivergedError(fid, trace.message)
            return EgomotionResult(Trajectory(ids[:len(poses)], poses), scale, fid, trace.message, traces)
        poses.append(est)
        pose = est
    return EgomotionResult(Trajectory(ids, poses), scale, None, "", traces)


def _angle_error_deg(a: float, b: float) -> float:
    return abs(math.degrees(wrap_angle(a - b)))


def pose_errors(est: PoseParams, gt: PoseParams) -> tuple[float, float, float]:
    """(azimuth error deg, elevation error deg, camera-center distance m)."""
    return (_angle_error_deg(est.azimuth, gt.azimuth),
            _angle_error_deg(est.elevation, gt.elevation),
            float(np.linalg.norm(est.c - gt.c)))


def camera_box_iou(mesh: TriangleMesh, est: PoseParams, gt: PoseParams) -> float:
    """IoU of the axis-aligned camera-frame vertex boxes of ``mesh`` under two poses."""
    return iou_3d(bounding_box_3d(transform_to_camera(mesh, est)),
                  bounding_box_3d(transform_to_camera(mesh, gt)))


def camera_center_positions(traj: Trajectory) -> np.ndarray:
    return np.array([p.c for p in traj.poses], dtype=np.float64).reshape(-1, 3)


def _check_frames(est: Trajectory, gt: Trajectory):
    if est.frame_ids != gt.frame_ids:
        raise FrameMismatchError("estimated and reference trajectories cover different frames")


def rigid_align(src, dst) -> np.ndarray:
    """Least-squares rotation + translation (no scale) of ``src`` onto ``dst``; returns moved ``src``."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    a, b = dst - mu_d, src - mu_s
    if len(src) < 2 or not np.any(b) or not np.any(a) or np.array_equal(a, b):
        return src - mu_s + mu_d
    with warnings.catch_warnings():
        # collinear point sets leave a rotation about their common axis free
        warnings.simplefilter("ignore", UserWarning)
        rot, _ = Rotation.align_vectors(a, b)
    return rot.apply(b) + mu_d


def ate(est: Trajectory, gt: Trajectory, align: bool = True) -> TrajectoryError:
    _check_frames(est, gt)
    e, g = camera_center_positions(est), camera_center_positions(gt)
    if align:
        e = rigid_align(e, g)
    res = np.linalg.norm(e - g, axis=1)
    return TrajectoryError(ate_rmse=float(np.sqrt(np.mean(res ** 2))), ate_residuals=res)


def rpe(est: Trajectory, gt: Trajectory, delta_frames: int = 1) -> TrajectoryError:
    """Translational relative error over frame pairs (t, t + delta), by list position."""
    _check_frames(est, gt)
    if delta_frames < 1:
        raise ValueError("delta_frames must be >= 1")
    if len(est) <= delta_frames:
        raise TrajectoryTooShortError(f"{len(est)} frames cannot span delta {delta_frames}")
    e, g = camera_center_positions(est), camera_center_positions(gt)
    d = delta_frames
    res = np.linalg.norm((e[d:] - e[:-d]) - (g[d:] - g[:-d]), axis=1)
    return TrajectoryError(rpe_rmse=float(np.sqrt(np.mean(res ** 2))), rpe_residuals=res)
