"""Metric scale of a canonical mesh from a 2D bounding box.

The mesh is resized about its centroid until the height of its reprojected
vertex box matches the reference box. Each projected vertex moves
monotonically with the scale factor, and for an object in front of the
camera the box height normally grows with it; this is checked on a coarse
grid before bisecting.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .camera import (Z_NEAR, Box2, CameraIntrinsics, PoseParams, bounding_box_2d, mask_bounding_box,
                     project)
from .errors import (BehindCameraError, DataError, NonMonotoneScaleError,
                     ScaleNotConvergedError, UnreachableScaleError)
from .mesh import TriangleMesh, scale_mesh, transform_to_camera

N_MONOTONE_SAMPLES = 16
# stay this fraction short of the scale at which the nearest vertex reaches z_near
_FRONT_MARGIN = 0.98


class ScaleFit(NamedTuple):
    scale: float
    mesh: TriangleMesh


def projected_box(mesh: TriangleMesh, pose: PoseParams, K: CameraIntrinsics,
                  z_near: float = Z_NEAR) -> Box2:
    Xc = transform_to_camera(mesh, pose).vertices
    return bounding_box_2d(project(Xc, K, z_near))


def mask_extent(mask) -> Box2:
    """Foreground box of a mask measured to pixel edges rather than centers.

    A pixel-center box is on average one pixel shorter than the continuous
    silhouette it samples, which biases a fitted scale low by 1/height.
    """
    b = mask_bounding_box(mask)
    return Box2(b.umin - 0.5, b.vmin - 0.5, b.umax + 0.5, b.vmax + 0.5)


def scale_residuals(mesh, pose, K, ref_box: Box2, z_near: float = Z_NEAR) -> tuple[float, float]:
    """(height, width) of the projected box minus those of ``ref_box``.

    Only the height is fitted; the width residual is a diagnostic.
    """
    b = projected_box(mesh, pose, K, z_near)
    return b.height - ref_box.height, b.width - ref_box.width


def _front_limit(mesh, pose, z_near) -> float:
    """Largest scale that keeps every vertex in front of the near plane."""
    Xc = transform_to_camera(mesh, pose).vertices
    z = Xc[:, 2]
    zc = float(Xc.mean(axis=0)[2])
    if not zc > z_near:
        i = int(np.argmin(z))
        raise BehindCameraError(i, float(z[i]), z_near)
    closer = z < zc
    if not closer.any():
        return math.inf
    return float(np.min((zc - z_near) / (zc - z[closer])))


def infer_scale(mesh: TriangleMesh, pose: PoseParams, K: CameraIntrinsics, ref_box: Box2,
                tol: float = 0.5, max_steps: int = 60, s_lo: float = 0.05, s_hi: float = 20.0,
                z_near: float = Z_NEAR) -> ScaleFit:
    """Find s in [s_lo, s_hi] whose projected box height is within ``tol`` px of ``ref_box``.

    The upper end of the search range is lowered if scaling that far would
    push a vertex through the near plane.
    """
    if not (ref_box.height > 0 and ref_box.width > 0):
        raise DataError("reference box is degenerate")
    if not (tol > 0 and 0 < s_lo < s_hi and max_steps >= 1):
        raise ValueError("need tol > 0, 0 < s_lo < s_hi and max_steps >= 1")
    center = mesh.centroid()
    target = ref_box.height

    def height(s):
        return projected_box(scale_mesh(mesh, s, center), pose, K, z_near).height

    if abs(height(1.0) - target) <= tol:
        return ScaleFit(1.0, mesh)

    hi = min(s_hi, _FRONT_MARGIN * _front_limit(mesh, pose, z_near))
    if not hi > s_lo:
        raise UnreachableScaleError(f"no scale above {s_lo} keeps the mesh in front of the camera")
    grid = np.geomspace(s_lo, hi, N_MONOTONE_SAMPLES)
    hs = np.array([height(s) for s in grid])
    if np.any(np.diff(hs) <= 0):
        raise NonMonotoneScaleError("projected height is not increasing with scale on this pose")
    if target < hs[0] - tol or target > hs[-1] + tol:
        raise UnreachableScaleError(
            f"target height {target:.4g}px outside [{hs[0]:.4g}, {hs[-1]:.4g}] for s in [{s_lo:g}, {hi:.4g}]")
    for s, h in ((grid[0], hs[0]), (grid[-1], hs[-1])):
        if abs(h - target) <= tol:
            return ScaleFit(float(s), scale_mesh(mesh, s, center))

    k = int(np.searchsorted(hs, target))
    lo, up = float(grid[k - 1]), float(grid[k])
    for _ in range(max_steps):
        mid = 0.5 * (lo + up)
        h = height(mid)
        if abs(h - target) <= tol:
            return ScaleFit(mid, scale_mesh(mesh, mid, center))
        if h < target:
            lo = mid
        else:
            up = mid
    raise ScaleNotConvergedError(f"no scale within {tol}px after {max_steps} bisection steps")
