"""Procedural meshes and synthetic scenes used by tests and experiment scripts.

Meshes follow the camera's y-down convention: the floor is y = 0 and "up"
is -y, so an object rendered from a small elevation appears upright and a
camera looking down on it has negative elevation.
"""
from __future__ import annotations

import math

import numpy as np

from .camera import CameraIntrinsics, PoseParams, look_at_pose
from .mesh import TriangleMesh

# desk-scale pose-recovery scene: a ~1.06 m chair seen from 1.5 m at 64x64
DESK_DISTANCE = 1.5
DESK_TARGET = (0.0, -0.5, 0.0)
DESK_ELEVATION_DEG = (-35.0, -10.0)
# coarse-to-fine sharpness schedule used by the synthetic suites
COARSE_TO_FINE = (1.5, 0.7, 0.3, 0.1)

_BOX_FACES = np.array([
    [0, 2, 1], [0, 3, 2],  # z-
    [4, 5, 6], [4, 6, 7],  # z+
    [0, 1, 5], [0, 5, 4],  # y-
    [3, 7, 6], [3, 6, 2],  # y+
    [0, 4, 7], [0, 7, 3],  # x-
    [1, 2, 6], [1, 6, 5],  # x+
])


def box(lo, hi) -> TriangleMesh:
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    V = np.array([
        [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
        [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
    ], dtype=np.float64)
    return TriangleMesh(V, _BOX_FACES)


def merge(meshes) -> TriangleMesh:
    V, F, off = [], [], 0
    for m in meshes:
        V.append(m.vertices)
        F.append(m.faces + off)
        off += m.n_vertices
    return TriangleMesh(np.concatenate(V), np.concatenate(F))


def cube(size: float = 1.0) -> TriangleMesh:
    h = size / 2
    return box((-h, -h, -h), (h, h, h))


def chair(seat_width=0.5, seat_depth=0.5, seat_height=0.45, back_height=0.5,
          leg=0.05, thickness=0.05) -> TriangleMesh:
    """Six-box chair standing on y = 0 with its backrest on the +z side."""
    w, d = seat_width / 2, seat_depth / 2
    parts = []
    for sx in (-1, 1):
        for sz in (-1, 1):
            x0 = sx * w - (leg if sx > 0 else 0.0)
            z0 = sz * d - (leg if sz > 0 else 0.0)
            parts.append(box((x0, -seat_height, z0), (x0 + leg, 0.0, z0 + leg)))
    top = -seat_height - thickness
    parts.append(box((-w, top, -d), (w, -seat_height, d)))
    parts.append(box((-w, top - back_height, d - thickness), (w, top, d)))
    return merge(parts)


def default_intrinsics(size: int = 64, fov_scale: float = 1.4) -> CameraIntrinsics:
    """Square pinhole camera with focal length ``fov_scale * size``."""
    f = fov_scale * size
    c = (size - 1) / 2.0
    return CameraIntrinsics(f, f, c, c, size, size)


def desk_chair() -> TriangleMesh:
    return chair(leg=0.06, thickness=0.06)


def desk_camera(size: int = 64) -> CameraIntrinsics:
    return default_intrinsics(size, 0.9)


def random_desk_pose(rng: np.random.Generator, height_locked: bool = True) -> PoseParams:
    """Camera on a sphere of radius DESK_DISTANCE about DESK_TARGET, looking at it."""
    az = rng.uniform(-math.pi, math.pi)
    el = math.radians(rng.uniform(*DESK_ELEVATION_DEG))
    return look_at_pose(az, el, DESK_DISTANCE, DESK_TARGET, height_locked)


def elliptical_orbit(n_frames: int, step_deg: float = 1.0, semi_x: float = 1.8, semi_z: float = 1.4,
                     height: float = -1.3, target=DESK_TARGET, azimuth0_deg: float = 20.0) -> list[PoseParams]:
    """Cameras on a horizontal ellipse about ``target``, all at camera height ``height``.

    Frame k looks at the target with azimuth ``azimuth0 + k * step``; the
    range to the target follows the ellipse, and elevation follows from the
    fixed height.
    """
    p = np.asarray(target, dtype=np.float64)
    poses = []
    for k in range(n_frames):
        a = math.radians(azimuth0_deg + k * step_deg)
        r = semi_x * semi_z / math.hypot(semi_z * math.sin(a), semi_x * math.cos(a))
        c = np.array([p[0] - r * math.sin(a), height, p[2] - r * math.cos(a)])
        w = (p - c) / np.linalg.norm(p - c)
        poses.append(PoseParams(math.atan2(w[0], w[2]), math.asin(-w[1]), tuple(c)))
    return poses
