import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrb.camera import Box2, PoseParams, look_at_pose
from rrb.errors import (BehindCameraError, DataError, NonMonotoneScaleError,
                        ScaleNotConvergedError, UnreachableScaleError)
from rrb.mesh import TriangleMesh, scale_mesh
from rrb.raster import render_hard
from rrb.scale import infer_scale, mask_extent, projected_box, scale_residuals
from rrb.shapes import DESK_TARGET, desk_camera, desk_chair

FACING = PoseParams(0.0, 0.0, (0.0, 0.0, -2.0))


def _square(z=0.0, half=0.25):
    V = [[-half, -half, z], [half, -half, z], [half, half, z], [-half, half, z]]
    return TriangleMesh(V, [[0, 1, 2], [0, 2, 3]])


def _box_with_height(box: Box2, height: float) -> Box2:
    mid = 0.5 * (box.vmin + box.vmax)
    return Box2(box.umin, mid - height / 2, box.umax, mid + height / 2)


def _oblique_views(n, seed=0):
    rng = np.random.default_rng(seed)
    return [look_at_pose(rng.uniform(-math.pi, math.pi), rng.uniform(-0.6, -0.15), rng.uniform(2.2, 3.2),
                         DESK_TARGET) for _ in range(n)]


def test_unit_scale_is_fixed_point(K64):
    sq = _square()
    fit = infer_scale(sq, FACING, K64, projected_box(sq, FACING, K64))
    assert fit.scale == 1.0 and fit.mesh is sq


def test_planar_square_half_height(K64):
    sq = _square()
    box = projected_box(sq, FACING, K64)
    assert box.height == pytest.approx(89.6 * 0.5 / 2, abs=1e-12)
    for tol in (0.5, 1e-3):
        fit = infer_scale(sq, FACING, K64, _box_with_height(box, box.height / 2), tol=tol)
        # fronto-parallel: height is linear in s, so the height tolerance maps to s directly
        assert abs(fit.scale - 0.5) <= tol / box.height


@pytest.mark.parametrize("pose", _oblique_views(4))
def test_chair_scale_from_forward_projection(pose):
    chair, K = desk_chair(), desk_camera(128)
    ref = projected_box(scale_mesh(chair, 1.37, chair.centroid()), pose, K)
    fit = infer_scale(chair, pose, K, ref, tol=0.1)
    assert fit.scale == pytest.approx(1.37, abs=0.01)


@pytest.mark.parametrize("pose", _oblique_views(4, seed=1))
def test_chair_scale_from_rendered_mask(pose):
    # a hard render quantizes the box to whole pixels; at 256 px that is well under 1%
    chair, K = desk_chair(), desk_camera(256)
    mask = render_hard(scale_mesh(chair, 1.37, chair.centroid()), pose, K)
    fit = infer_scale(chair, pose, K, mask_extent(mask), tol=0.1)
    assert fit.scale == pytest.approx(1.37, rel=0.01)


def test_idempotent_on_own_output():
    chair, K = desk_chair(), desk_camera(128)
    pose = _oblique_views(1, seed=2)[0]
    ref = projected_box(scale_mesh(chair, 0.8, chair.centroid()), pose, K)
    first = infer_scale(chair, pose, K, ref)
    again = infer_scale(first.mesh, pose, K, ref)
    h1 = projected_box(first.mesh, pose, K).height
    h2 = projected_box(again.mesh, pose, K).height
    assert again.scale == 1.0
    assert abs(h2 - h1) <= 2 * 0.5


@settings(max_examples=25)
@given(st.floats(0.3, 3.0), st.integers(0, 50), st.sampled_from([0.5, 0.1, 0.01]))
def test_residual_within_tol(s_true, view_seed, tol):
    chair, K = desk_chair(), desk_camera(64)
    pose = _oblique_views(1, seed=view_seed)[0]
    ref = projected_box(scale_mesh(chair, s_true, chair.centroid()), pose, K)
    fit = infer_scale(chair, pose, K, ref, tol=tol)
    dh, _ = scale_residuals(fit.mesh, pose, K, ref)
    assert abs(dh) <= tol
    assert 0.05 <= fit.scale <= 20


def test_mask_extent_measures_to_pixel_edges():
    m = np.zeros((6, 6))
    m[1:4, 2:5] = 1.0
    assert mask_extent(m) == Box2(1.5, 0.5, 4.5, 3.5)


def test_unreachable_small_target(cube_mesh, K64, cube_view):
    with pytest.raises(UnreachableScaleError):
        infer_scale(cube_mesh, cube_view, K64, Box2(30, 30, 30.2, 30.2))


def test_near_plane_caps_the_search(cube_mesh, K64):
    # near face at 0.5 m: past s ~ 1.8 a vertex would cross z_near, so a huge
    # target is unreachable rather than a behind-camera failure
    pose = look_at_pose(0.0, 0.0, 1.0)
    with pytest.raises(UnreachableScaleError):
        infer_scale(cube_mesh, pose, K64, Box2(0, -5e4, 63, 5e4))


def test_non_monotone_height_is_rejected(K64):
    flat = TriangleMesh([[-0.25, 0, -0.25], [0.25, 0, -0.25], [0.25, 0, 0.25], [-0.25, 0, 0.25]],
                        [[0, 1, 2], [0, 2, 3]])
    # seen edge-on at camera height its projected height is zero for every s
    with pytest.raises(NonMonotoneScaleError):
        infer_scale(flat, FACING, K64, Box2(10, 10, 20, 20))


def test_behind_camera(cube_mesh, K64):
    with pytest.raises(BehindCameraError):
        infer_scale(cube_mesh, PoseParams(0.0, 0.0, (0.0, 0.0, 5.0)), K64, Box2(0, 0, 10, 10))


def test_not_converged(K64):
    sq = _square()
    with pytest.raises(ScaleNotConvergedError):
        infer_scale(sq, FACING, K64, Box2(0, 0, 10, 13.37), tol=1e-9, max_steps=1)


@pytest.mark.parametrize("box", [Box2(0, 0, 10, 0), Box2(0, 0, 0, 10)])
def test_degenerate_reference_box(K64, box):
    with pytest.raises(DataError):
        infer_scale(_square(), FACING, K64, box)


@pytest.mark.parametrize("kw", [dict(tol=0), dict(s_lo=2.0, s_hi=1.0), dict(max_steps=0)])
def test_bad_search_options(K64, kw):
    with pytest.raises(ValueError):
        infer_scale(_square(), FACING, K64, Box2(0, 0, 10, 10), **kw)
