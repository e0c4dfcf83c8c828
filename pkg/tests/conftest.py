import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import rrb
from rrb.camera import CameraIntrinsics, PoseParams, look_at_pose
from rrb.fileio import read_intrinsics
from rrb.shapes import cube, default_intrinsics

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")
# documented golden pose for the bundled cube (see scripts/make_golden.py)
GOLDEN_AZIMUTH_DEG = 30.0
GOLDEN_ELEVATION_DEG = -20.0
GOLDEN_CENTER = (-1.4, -1.0, -2.4)


@pytest.fixture
def cube_mesh():
    return cube()


@pytest.fixture
def K64() -> CameraIntrinsics:
    return default_intrinsics(64)


@pytest.fixture
def golden_scene():
    mesh = rrb.read_obj(rrb.data_path("cube.obj"))
    K = read_intrinsics(rrb.data_path("camera64.txt"))
    pose = PoseParams.from_degrees(GOLDEN_AZIMUTH_DEG, GOLDEN_ELEVATION_DEG, GOLDEN_CENTER)
    return mesh, K, pose


@pytest.fixture
def cube_view():
    """Cube seen from 3 m at azimuth 30, elevation -20 degrees."""
    return look_at_pose(math.radians(30), math.radians(-20), 3.0)


def small_scene(rng, n_tri=3, size=16):
    """Random triangles well in front of a small camera, with their pose."""
    from rrb.mesh import TriangleMesh
    K = CameraIntrinsics(1.2 * size, 1.2 * size, (size - 1) / 2, (size - 1) / 2, size, size)
    pose = PoseParams(rng.uniform(-math.pi, math.pi), rng.uniform(-0.8, 0.8),
                      tuple(rng.uniform(-1, 1, size=3)))
    Xc = np.concatenate([rng.uniform(-0.8, 0.8, size=(3 * n_tri, 2)),
                         rng.uniform(2.5, 3.5, size=(3 * n_tri, 1))], axis=1)
    Xo = Xc @ pose.R.T + pose.c
    return TriangleMesh(Xo, np.arange(3 * n_tri).reshape(n_tri, 3)), pose, K


def edge_distance(points_2d, faces, width, height):
    """Distance from every pixel center to the nearest projected triangle edge."""
    P = np.asarray(points_2d, dtype=np.float64)
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    best = np.full((height, width), np.inf)
    for f in np.asarray(faces):
        for i in range(3):
            a, b = P[f[i]], P[f[(i + 1) % 3]]
            ab = b - a
            L = float(ab @ ab)
            t = 0.0 if L == 0 else np.clip(((u - a[0]) * ab[0] + (v - a[1]) * ab[1]) / L, 0, 1)
            best = np.minimum(best, np.hypot(u - a[0] - t * ab[0], v - a[1] - t * ab[1]))
    return best


# acceptance criteria: criterion number -> list of (ok, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def record_criterion(number: int, title: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(number, (title, []))[1].append((bool(ok), detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, parts = ACCEPTANCE[number]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        details = "; ".join(f"{d} [{'ok' if ok else 'FAILED'}]" for ok, d in parts)
        terminalreporter.write_line(f"criterion {number} {verdict}: {title}: {details}")
