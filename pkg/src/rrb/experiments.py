"""Seeded synthetic experiments shared by scripts/ and the acceptance suite.

Both run on the desk-scale scene from ``shapes``: a six-box chair about
1.2 m across seen from 1.5 m at 64x64.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraIntrinsics
from .egomotion import (EgomotionResult, Trajectory, ate, camera_box_iou, estimate_trajectory,
                        pose_errors, rpe)
from .mesh import TriangleMesh
from .optimize import (DEFAULT_TRANSLATION_PERTURB, VIEWNET_AZIMUTH_DEG, VIEWNET_ELEVATION_DEG,
                       OptimizerOptions, optimize_pose, perturb_pose)
from .raster import RenderConfig, render_hard
from .shapes import (COARSE_TO_FINE, desk_camera, desk_chair, elliptical_orbit,
                     random_desk_pose)

POSE_TRIAL_OPTIONS = OptimizerOptions(sigma_schedule=COARSE_TO_FINE, max_iters=400)
ORBIT_OPTIONS = OptimizerOptions(sigma_schedule=(0.3, 0.1), tol=1e-8)


@dataclass
class PoseTrials:
    # columns: azimuth deg, elevation deg, translation m, 3D IoU
    errors: np.ndarray
    initial_errors: np.ndarray
    diameter: float
    seconds: float
    statuses: list[str] = field(default_factory=list)

    @property
    def median(self) -> np.ndarray:
        return np.median(self.errors, axis=0)

    def successes(self, az_deg=11.0, el_deg=6.0, trans_frac=0.05) -> np.ndarray:
        e = self.errors
        return (e[:, 0] <= az_deg) & (e[:, 1] <= el_deg) & (e[:, 2] <= trans_frac * self.diameter)


def pose_recovery_trials(n_trials: int = 20, seed: int = 0, mesh: TriangleMesh | None = None,
                         K: CameraIntrinsics | None = None,
                         opts: OptimizerOptions = POSE_TRIAL_OPTIONS,
                         cfg: RenderConfig = RenderConfig(deterministic=True),
                         azimuth_deg: float = VIEWNET_AZIMUTH_DEG,
                         elevation_deg: float = VIEWNET_ELEVATION_DEG,
                         translation_m: float = DEFAULT_TRANSLATION_PERTURB,
                         progress=None) -> PoseTrials:
    """Random desk views, hard-rendered references and perturbed starts."""
    mesh = desk_chair() if mesh is None else mesh
    K = desk_camera() if K is None else K
    rng = np.random.default_rng(seed)
    pivot = mesh.centroid()
    errs, init_errs, statuses = [], [], []
    t0 = time.perf_counter()
    for trial in range(n_trials):
        gt = random_desk_pose(rng)
        ref = render_hard(mesh, gt, K)
        init = perturb_pose(gt, azimuth_deg, elevation_deg, translation_m,
                            seed=1000 * seed + trial, pivot=pivot)
        est, trace = optimize_pose(mesh, init, K, ref, cfg, opts)
        errs.append((*pose_errors(est, gt), camera_box_iou(mesh, est, gt)))
        init_errs.append((*pose_errors(init, gt), camera_box_iou(mesh, init, gt)))
        statuses.append(trace.status)
        if progress is not None:
            progress(trial, errs[-1], init_errs[-1], trace)
    return PoseTrials(np.array(errs), np.array(init_errs), mesh.diameter(),
                      time.perf_counter() - t0, statuses)


@dataclass
class OrbitRun:
    result: EgomotionResult
    ground_truth: Trajectory
    ate_rmse: float
    ate_raw_rmse: float
    rpe_rmse: float
    # per-frame (azimuth deg, elevation deg, translation m)
    frame_errors: np.ndarray
    diameter: float
    seconds: float


def orbit_experiment(n_frames: int = 20, size: int = 64, opts: OptimizerOptions = ORBIT_OPTIONS,
                     cfg: RenderConfig = RenderConfig(deterministic=True), **orbit) -> OrbitRun:
    """Chained egomotion on masks rendered along an elliptical orbit, exact frame-0 start."""
    mesh, K = desk_chair(), desk_camera(size)
    poses = elliptical_orbit(n_frames, **orbit)
    masks = [render_hard(mesh, p, K) for p in poses]
    t0 = time.perf_counter()
    res = estimate_trajectory(masks, mesh, K, poses[0], cfg, opts)
    secs = time.perf_counter() - t0
    gt = Trajectory(range(n_frames), poses)
    if not res.ok:
        nan = math.nan
        return OrbitRun(res, gt, nan, nan, nan, np.empty((0, 3)), mesh.diameter(), secs)
    fe = np.array([pose_errors(a, b) for a, b in zip(res.trajectory.poses, poses)])
    return OrbitRun(res, gt, ate(res.trajectory, gt).ate_rmse,
                    ate(res.trajectory, gt, align=False).ate_rmse,
                    rpe(res.trajectory, gt).rpe_rmse, fe, mesh.diameter(), secs)
