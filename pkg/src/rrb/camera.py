"""Pinhole camera, view parameterization and 2D boxes.

Conventions
-----------
Camera frame: x right, y down, z forward. Pixel (u, v) has its origin at the
top-left pixel center, u grows rightward and v downward.

A pose maps object-frame points into the camera frame as
``X_cam = R.T @ (X_obj - c)`` where ``R = Ry(azimuth) @ Rx(elevation)`` and
``c`` is the camera center expressed in the object frame. The columns of R
are the camera axes in the object frame: elevation tilts the camera about its
own right axis, azimuth then turns it about the object's vertical (y) axis.
Positive elevation tilts the optical axis towards -y, so with y-down meshes
(up = -y) a camera looking down on an object has negative elevation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import BehindCameraError, EmptyMaskError

Z_NEAR = 1e-4


def wrap_angle(a: float) -> float:
    """Wrap an angle in radians to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass(frozen=True)
class PoseParams:
    """Azimuth/elevation (radians) and camera center ``translation`` (meters).

    With ``height_locked`` set the y component of the translation is held
    fixed by the optimizer (known camera height).
    """

    azimuth: float
    elevation: float
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    height_locked: bool = True

    def __post_init__(self):
        object.__setattr__(self, "azimuth", wrap_angle(float(self.azimuth)))
        e = float(self.elevation)
        if not (-math.pi / 2 - 1e-12 <= e <= math.pi / 2 + 1e-12):
            raise ValueError(f"elevation {e} outside [-pi/2, pi/2]")
        object.__setattr__(self, "elevation", min(max(e, -math.pi / 2), math.pi / 2))
        t = tuple(float(x) for x in self.translation)
        if len(t) != 3:
            raise ValueError("translation must have 3 components")
        object.__setattr__(self, "translation", t)

    @classmethod
    def from_degrees(cls, azimuth_deg, elevation_deg, translation=(0.0, 0.0, 0.0), height_locked=True):
        return cls(math.radians(azimuth_deg), math.radians(elevation_deg), tuple(translation), height_locked)

    @property
    def c(self) -> np.ndarray:
        return np.array(self.translation, dtype=np.float64)

    @property
    def R(self) -> np.ndarray:
        return rotation_from_view(self.azimuth, self.elevation)

    @property
    def azimuth_deg(self) -> float:
        return math.degrees(self.azimuth)

    @property
    def elevation_deg(self) -> float:
        return math.degrees(self.elevation)

    def free_names(self) -> tuple[str, ...]:
        if self.height_locked:
            return ("azimuth", "elevation", "tx", "tz")
        return ("azimuth", "elevation", "tx", "ty", "tz")

    def free_vector(self) -> np.ndarray:
        tx, ty, tz = self.translation
        if self.height_locked:
            return np.array([self.azimuth, self.elevation, tx, tz])
        return np.array([self.azimuth, self.elevation, tx, ty, tz])

    def with_free_vector(self, x) -> "PoseParams":
        """Rebuild a pose from a free-parameter vector; clamps elevation."""
        x = [float(v) for v in x]
        el = min(max(x[1], -math.pi / 2), math.pi / 2)
        if self.height_locked:
            t = (x[2], self.translation[1], x[3])
        else:
            t = (x[2], x[3], x[4])
        return replace(self, azimuth=x[0], elevation=el, translation=t)


@dataclass(frozen=True)
class Box2:
    umin: float
    vmin: float
    umax: float
    vmax: float

    def __post_init__(self):
        if self.umin > self.umax or self.vmin > self.vmax:
            raise ValueError("Box2 requires umin <= umax and vmin <= vmax")

    @property
    def width(self) -> float:
        return self.umax - self.umin

    @property
    def height(self) -> float:
        return self.vmax - self.vmin

    def contains(self, other: "Box2", slack: float = 0.0) -> bool:
        return (other.umin >= self.umin - slack and other.vmin >= self.vmin - slack
                and other.umax <= self.umax + slack and other.vmax <= self.vmax + slack)


def _rx(e):
    c, s = math.cos(e), math.sin(e)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _drx(e):
    c, s = math.cos(e), math.sin(e)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def _dry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def rotation_from_view(azimuth: float, elevation: float) -> np.ndarray:
    """R = Ry(azimuth) @ Rx(elevation), both right-handed; no in-plane roll."""
    return _ry(azimuth) @ _rx(elevation)


def rotation_derivatives(azimuth: float, elevation: float) -> tuple[np.ndarray, np.ndarray]:
    """(dR/d azimuth, dR/d elevation)."""
    return _dry(azimuth) @ _rx(elevation), _ry(azimuth) @ _drx(elevation)


def project(vertices_cam, K: CameraIntrinsics, z_near: float = Z_NEAR) -> np.ndarray:
    """Perspective projection of camera-frame points to pixel coordinates.

    Raises BehindCameraError for the first vertex with ``z <= z_near``.
    """
    X = np.asarray(vertices_cam, dtype=np.float64).reshape(-1, 3)
    z = X[:, 2]
    bad = np.flatnonzero(~(z > z_near))
    if bad.size:
        i = int(bad[0])
        raise BehindCameraError(i, float(z[i]), z_near)
    u = K.fx * X[:, 0] / z + K.cx
    v = K.fy * X[:, 1] / z + K.cy
    return np.stack([u, v], axis=1)


def bounding_box_2d(points) -> Box2:
    """Axis-aligned box of 2D points; deliberately not clipped to the image."""
    P = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if P.shape[0] == 0:
        raise ValueError("bounding_box_2d needs at least one point")
    lo = P.min(axis=0)
    hi = P.max(axis=0)
    return Box2(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def mask_bounding_box(mask, threshold: float = 0.5) -> Box2:
    """Tight box over the pixel centers with value >= threshold."""
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must lie in (0, 1)")
    m = np.asarray(mask)
    vs, us = np.nonzero(m >= threshold)
    if us.size == 0:
        raise EmptyMaskError(f"no pixel >= {threshold} in mask")
    return Box2(float(us.min()), float(vs.min()), float(us.max()), float(vs.max()))


def look_at_pose(azimuth: float, elevation: float, distance: float, target=(0.0, 0.0, 0.0),
                 height_locked: bool = True) -> PoseParams:
    """Pose whose optical axis passes through ``target`` at the given distance."""
    R = rotation_from_view(azimuth, elevation)
    c = np.asarray(target, dtype=np.float64) - distance * R[:, 2]
    return PoseParams(azimuth, elevation, tuple(c), height_locked)
