"""Triangle meshes: OBJ I/O, rigid and scale transforms, 3D boxes."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .camera import PoseParams
from .errors import (EmptyMeshError, FaceIndexError, MalformedVertexError,
                     ShortFaceError)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (N, 3) float64
    faces: np.ndarray  # (F, 3) int64

    def __post_init__(self):
        V = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        F = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if F.size:
            if F.min() < 0 or F.max() >= len(V):
                raise FaceIndexError("face index out of range")
            if np.any((F[:, 0] == F[:, 1]) | (F[:, 1] == F[:, 2]) | (F[:, 0] == F[:, 2])):
                raise FaceIndexError("face with repeated vertex index")
        V.flags.writeable = False
        F.flags.writeable = False
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "faces", F)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def diameter(self) -> float:
        """Diagonal of the axis-aligned bounding box."""
        b = bounding_box_3d(self)
        return float(np.linalg.norm(np.subtract(b.max, b.min)))

    def with_vertices(self, vertices) -> "TriangleMesh":
        return TriangleMesh(vertices, self.faces)

    def __eq__(self, other):
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.faces, other.faces))


@dataclass(frozen=True)
class Box3:
    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(x) for x in self.min)
        hi = tuple(float(x) for x in self.max)
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("Box3 requires min <= max component-wise")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    def volume(self) -> float:
        return float(np.prod(np.subtract(self.max, self.min)))


def _resolve_index(tok: str, n_vertices: int, lineno: int) -> int:
    head = tok.split("/")[0]
    try:
        i = int(head)
    except ValueError:
        raise FaceIndexError(f"non-integer face index {tok!r}", lineno) from None
    if i == 0:
        raise FaceIndexError("face index 0 is invalid in OBJ", lineno)
    j = i - 1 if i > 0 else n_vertices + i
    if not 0 <= j < n_vertices:
        raise FaceIndexError(f"face index {i} out of range for {n_vertices} vertices", lineno)
    return j


def load_obj(text) -> TriangleMesh:
    """Parse the ``v``/``f`` subset of Wavefront OBJ.

    ``text`` may be a string or a readable text stream. Polygons are
    fan-triangulated from their first vertex; negative indices are relative
    to the vertices read so far.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    verts: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    for lineno, line in enumerate(text, start=1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MalformedVertexError("vertex needs 3 coordinates", lineno)
            try:
                xyz = tuple(float(p) for p in parts[1:4])
            except ValueError:
                raise MalformedVertexError(f"non-numeric vertex {line.strip()!r}", lineno) from None
            if not all(np.isfinite(xyz)):
                raise MalformedVertexError("non-finite vertex coordinate", lineno)
            verts.append(xyz)
        elif tag == "f":
            idx = [_resolve_index(t, len(verts), lineno) for t in parts[1:]]
            if len(idx) < 3:
                raise ShortFaceError(f"face has {len(idx)} indices, need >= 3", lineno)
            for k in range(1, len(idx) - 1):
                tri = (idx[0], idx[k], idx[k + 1])
                if len(set(tri)) < 3:
                    raise FaceIndexError("face repeats a vertex index", lineno)
                faces.append(tri)
    if not faces:
        raise EmptyMeshError("OBJ contains no faces")
    return TriangleMesh(np.array(verts), np.array(faces))


def read_obj(path) -> TriangleMesh:
    with open(path, "r") as fh:
        return load_obj(fh)


def serialize_obj(mesh: TriangleMesh) -> str:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    return "\n".join(lines) + "\n"


def write_obj(mesh: TriangleMesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_obj(mesh))


def transform_to_camera(mesh: TriangleMesh, pose: PoseParams) -> TriangleMesh:
    """Vertices mapped by X -> R.T (X - c)."""
    Xc = (mesh.vertices - pose.c) @ pose.R
    return TriangleMesh(Xc, mesh.faces)


def transform_from_camera(mesh: TriangleMesh, pose: PoseParams) -> TriangleMesh:
    return TriangleMesh(mesh.vertices @ pose.R.T + pose.c, mesh.faces)


def scale_mesh(mesh: TriangleMesh, s: float, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    if not s > 0:
        raise ValueError(f"scale must be positive, got {s}")
    p = np.asarray(center, dtype=np.float64)
    return TriangleMesh(p + s * (mesh.vertices - p), mesh.faces)


def bounding_box_3d(mesh_or_vertices) -> Box3:
    V = mesh_or_vertices.vertices if isinstance(mesh_or_vertices, TriangleMesh) else mesh_or_vertices
    V = np.asarray(V, dtype=np.float64).reshape(-1, 3)
    if len(V) == 0:
        raise ValueError("bounding box of an empty vertex list")
    return Box3(tuple(V.min(axis=0)), tuple(V.max(axis=0)))


def iou_3d(a: Box3, b: Box3) -> float:
    """Volume IoU of two axis-aligned boxes.

    Zero-volume union gives 0, except identical degenerate boxes which give 1.
    """
    lo = np.maximum(a.min, b.min)
    hi = np.minimum(a.max, b.max)
    inter = float(np.prod(np.clip(hi - lo, 0.0, None)))
    union = a.volume() + b.volume() - inter
    if union <= 0.0:
        return 1.0 if a == b else 0.0
    return inter / union
