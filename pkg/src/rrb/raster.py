"""Soft silhouette rasterizer with hand-derived reverse-mode gradients.

Each projected triangle k contributes ``D_k(p) = logistic(d_k(p) / sigma)``
at pixel center p, where ``d_k`` is the signed Euclidean distance to the
triangle boundary (positive inside). Contributions are fused as
``S(p) = 1 - prod_k (1 - D_k(p))`` with the product taken in face-list order.

Two evaluation paths share the same per-pair geometry:

* deterministic: sequential over faces, each face touching only the pixel
  window where its contribution exceeds the culling bound. This is the
  reference used for golden images.
* batched: all (face, pixel) pairs at once in pixel chunks, no culling.

They agree to within the culling bound (1e-9).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .camera import Z_NEAR, CameraIntrinsics, PoseParams, project, rotation_derivatives
from .mesh import TriangleMesh, transform_to_camera

# total change of any pixel allowed by culling; each culled face moves S by at
# most logistic(-margin / sigma), so the per-face bound is CULL_TOL / F
CULL_TOL = 1e-9
_CHUNK_PAIRS = 1 << 18


@dataclass(frozen=True)
class RenderConfig:
    sigma: float = 1.0
    z_near: float = Z_NEAR
    deterministic: bool = False

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.z_near > 0:
            raise ValueError("z_near must be positive")


@dataclass(frozen=True)
class PoseGradient:
    azimuth: float
    elevation: float
    translation: np.ndarray

    def free_vector(self, height_locked: bool) -> np.ndarray:
        tx, ty, tz = self.translation
        if height_locked:
            return np.array([self.azimuth, self.elevation, tx, tz])
        return np.array([self.azimuth, self.elevation, tx, ty, tz])


class _PairGeometry:
    """Signed distance of pixels to triangles plus what the backward pass needs.

    Vertex coordinates and pixel coordinates are broadcast against each other,
    so the same code serves one face over a pixel window and all faces over a
    flat pixel list.
    """

    __slots__ = ("d", "sign", "dmin", "t", "wx", "wy", "sel", "dists", "lengths")

    def __init__(self, xs, ys, px, py, need_grad=True, keep_all=False):
        area2 = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (xs[2] - xs[0]) * (ys[1] - ys[0])
        dists, ts, wxs, wys, crs, lens = [], [], [], [], [], []
        for e in range(3):
            ax, ay = xs[e], ys[e]
            ex = xs[(e + 1) % 3] - ax
            ey = ys[(e + 1) % 3] - ay
            apx = px - ax
            apy = py - ay
            L2 = ex * ex + ey * ey
            with np.errstate(invalid="ignore", divide="ignore"):
                t = np.where(L2 > 0, np.clip((apx * ex + apy * ey) / L2, 0.0, 1.0), 0.0)
            wx = apx - t * ex
            wy = apy - t * ey
            dists.append(np.sqrt(wx * wx + wy * wy))
            crs.append(ex * apy - ey * apx)
            ts.append(t)
            wxs.append(wx)
            wys.append(wy)
            lens.append(np.sqrt(L2))
        c0, c1, c2 = crs
        inside = ((c0 > 0) & (c1 > 0) & (c2 > 0)) | ((c0 < 0) & (c1 < 0) & (c2 < 0))
        inside &= area2 != 0
        d0, d1, d2 = dists
        # nearest edge, lowest index wins ties
        s0 = (d0 <= d1) & (d0 <= d2)
        s1 = ~s0 & (d1 <= d2)
        s2 = ~(s0 | s1)
        dmin = np.where(s0, d0, np.where(s1, d1, d2))
        self.sign = np.where(inside, 1.0, -1.0)
        self.d = self.sign * dmin
        self.dmin = dmin
        if need_grad:
            self.sel = (s0, s1, s2)
            self.t = ts
            self.wx = np.where(s0, wxs[0], np.where(s1, wxs[1], wxs[2]))
            self.wy = np.where(s0, wys[0], np.where(s1, wys[1], wys[2]))
        if keep_all:
            self.dists = dists
            self.t = ts
            self.lengths = lens

    def vertex_grads(self, g):
        """Contract dL/dd (pair array ``g``) into per-vertex 2D gradients.

        Returns an array (3, 2, ...) summed over the trailing pixel axes
        given by the caller. For nearest edge (a, b) with foot parameter t
        and unit normal n from the foot towards p:
        dd/da = -sign (1 - t) n, dd/db = -sign t n.
        """
        with np.errstate(invalid="ignore", divide="ignore"):
            m = np.where(self.dmin > 0, -g * self.sign / self.dmin, 0.0)
        mx = m * self.wx
        my = m * self.wy
        s0, s1, s2 = self.sel
        t0, t1, t2 = self.t
        coefs = (
            np.where(s0, 1.0 - t0, 0.0) + np.where(s2, t2, 0.0),
            np.where(s1, 1.0 - t1, 0.0) + np.where(s0, t0, 0.0),
            np.where(s2, 1.0 - t2, 0.0) + np.where(s1, t1, 0.0),
        )
        return [(c * mx, c * my) for c in coefs]


def signed_distance_2d(p, tri) -> float:
    """Signed distance (pixels) from point p to a 2D triangle; positive inside.

    Collinear triangles have no interior and give -distance everywhere.
    """
    T = np.asarray(tri, dtype=np.float64).reshape(3, 2)
    g = _PairGeometry(T[:, 0], T[:, 1], np.float64(p[0]), np.float64(p[1]), need_grad=False)
    return float(g.d)


def pixel_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat pixel-center coordinates (u, v), row-major."""
    v, u = np.divmod(np.arange(width * height), width)
    return u.astype(np.float64), v.astype(np.float64)


class _Context:
    __slots__ = ("mode", "sigma", "shape", "faces", "items", "n_vertices")


def cull_margin(n_faces: int, sigma: float) -> float:
    """Distance beyond which a face's contribution is below CULL_TOL / n_faces."""
    return sigma * math.log(max(n_faces, 1) / CULL_TOL)


def _face_window(tri, margin, width, height):
    u0 = max(0, math.ceil(tri[:, 0].min() - margin))
    u1 = min(width - 1, math.floor(tri[:, 0].max() + margin))
    v0 = max(0, math.ceil(tri[:, 1].min() - margin))
    v1 = min(height - 1, math.floor(tri[:, 1].max() + margin))
    if u0 > u1 or v0 > v1:
        return None
    return u0, u1, v0, v1


def _forward_sequential(pts, faces, width, height, sigma, need_ctx):
    coverage = np.ones((height, width))  # running prod of (1 - D_k)
    items = []
    margin = cull_margin(len(faces), sigma)
    for k in range(len(faces)):
        tri = pts[faces[k]]
        win = _face_window(tri, margin, width, height)
        if win is None:
            continue
        u0, u1, v0, v1 = win
        px = np.arange(u0, u1 + 1, dtype=np.float64)[None, :]
        py = np.arange(v0, v1 + 1, dtype=np.float64)[:, None]
        geo = _PairGeometry(tri[:, 0], tri[:, 1], px, py, need_grad=need_ctx)
        x = geo.d / sigma
        T = expit(-x)
        view = coverage[v0:v1 + 1, u0:u1 + 1]
        if need_ctx:
            items.append((k, win, geo, expit(x), T, view.copy()))
        view *= T
    return 1.0 - coverage, items


def _forward_batched(pts, faces, width, height, sigma, need_ctx):
    u, v = pixel_grid(width, height)
    P = u.size
    F = len(faces)
    out = np.empty(P)
    items = []
    tri = pts[faces]  # (F, 3, 2)
    xs = [tri[:, i, 0][:, None] for i in range(3)]
    ys = [tri[:, i, 1][:, None] for i in range(3)]
    step = max(1, _CHUNK_PAIRS // max(F, 1))
    for lo in range(0, P, step):
        hi = min(P, lo + step)
        geo = _PairGeometry(xs, ys, u[None, lo:hi], v[None, lo:hi], need_grad=need_ctx)
        x = geo.d / sigma
        T = expit(-x)
        out[lo:hi] = 1.0 - np.multiply.reduce(T, axis=0)
        if need_ctx:
            items.append((lo, hi, geo, expit(x), T))
    return out.reshape(height, width), items


def rasterize(points_2d, faces, width: int, height: int, sigma: float = 1.0,
              deterministic: bool = False, return_context: bool = False):
    """Soft silhouette of 2D triangles sampled at integer pixel centers."""
    pts = np.asarray(points_2d, dtype=np.float64).reshape(-1, 2)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(faces) == 0:
        img, items = np.zeros((height, width)), []
    elif deterministic:
        img, items = _forward_sequential(pts, faces, width, height, sigma, return_context)
    else:
        img, items = _forward_batched(pts, faces, width, height, sigma, return_context)
    if not return_context:
        return img
    ctx = _Context()
    ctx.mode = "seq" if deterministic else "batch"
    ctx.sigma = sigma
    ctx.shape = (height, width)
    ctx.faces = faces
    ctx.items = items
    ctx.n_vertices = len(pts)
    return img, ctx


def rasterize_backward(ctx: _Context, adjoint) -> np.ndarray:
    """Gradient of sum(adjoint * S) w.r.t. the 2D vertex positions, shape (N, 2)."""
    adj = np.asarray(adjoint, dtype=np.float64)
    if adj.shape != ctx.shape:
        raise ValueError(f"adjoint shape {adj.shape} != image shape {ctx.shape}")
    F = len(ctx.faces)
    gface = np.zeros((F, 3, 2))
    inv_sigma = 1.0 / ctx.sigma
    if ctx.mode == "seq":
        suffix = np.ones(ctx.shape)
        for k, (u0, u1, v0, v1), geo, D, T, prefix in reversed(ctx.items):
            sview = suffix[v0:v1 + 1, u0:u1 + 1]
            g = adj[v0:v1 + 1, u0:u1 + 1] * (prefix * sview) * (D * T * inv_sigma)
            for i, (gx, gy) in enumerate(geo.vertex_grads(g)):
                gface[k, i, 0] = gx.sum()
                gface[k, i, 1] = gy.sum()
            sview *= T
    else:
        flat = adj.reshape(-1)
        for lo, hi, geo, D, T in ctx.items:
            ones = np.ones((1, hi - lo))
            prefix = np.cumprod(np.concatenate([ones, T[:-1]]), axis=0)
            suffix = np.cumprod(np.concatenate([ones, T[:0:-1]]), axis=0)[::-1]
            g = flat[None, lo:hi] * (prefix * suffix) * (D * T * inv_sigma)
            for i, (gx, gy) in enumerate(geo.vertex_grads(g)):
                gface[:, i, 0] += gx.sum(axis=1)
                gface[:, i, 1] += gy.sum(axis=1)
    grad = np.zeros((ctx.n_vertices, 2))
    np.add.at(grad, ctx.faces.reshape(-1), gface.reshape(-1, 2))
    return grad


def hard_rasterize(points_2d, faces, width: int, height: int) -> np.ndarray:
    """Binary coverage of pixel centers by 2D triangles (edge functions).

    Pixels on an edge count as covered; degenerate triangles cover nothing.
    Used to synthesize ground-truth masks.
    """
    pts = np.asarray(points_2d, dtype=np.float64).reshape(-1, 2)
    out = np.zeros((height, width), dtype=bool)
    for f in np.asarray(faces, dtype=np.int64).reshape(-1, 3):
        (x0, y0), (x1, y1), (x2, y2) = pts[f]
        area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area2 == 0:
            continue
        win = _face_window(pts[f], 0.0, width, height)
        if win is None:
            continue
        u0, u1, v0, v1 = win
        px = np.arange(u0, u1 + 1, dtype=np.float64)[None, :]
        py = np.arange(v0, v1 + 1, dtype=np.float64)[:, None]
        s = 1.0 if area2 > 0 else -1.0
        e0 = s * ((x1 - x0) * (py - y0) - (y1 - y0) * (px - x0))
        e1 = s * ((x2 - x1) * (py - y1) - (y2 - y1) * (px - x1))
        e2 = s * ((x0 - x2) * (py - y2) - (y0 - y2) * (px - x2))
        out[v0:v1 + 1, u0:u1 + 1] |= (e0 >= 0) & (e1 >= 0) & (e2 >= 0)
    return out.astype(np.float64)


def render_hard(mesh: TriangleMesh, pose: PoseParams, K: CameraIntrinsics, z_near: float = Z_NEAR) -> np.ndarray:
    """Binary silhouette (the sigma -> 0 limit of render_silhouette)."""
    if mesh.n_faces == 0:
        return np.zeros(K.shape)
    _, pts = _project_mesh(mesh, pose, K, z_near)
    return hard_rasterize(pts, mesh.faces, K.width, K.height)


def _project_mesh(mesh, pose, K, z_near):
    Xc = transform_to_camera(mesh, pose).vertices
    return Xc, project(Xc, K, z_near)


def pose_backward(mesh: TriangleMesh, pose: PoseParams, K: CameraIntrinsics, Xc, grad_2d) -> PoseGradient:
    """Chain 2D vertex gradients through projection, rigid transform and rotation."""
    X, Y, Z = Xc[:, 0], Xc[:, 1], Xc[:, 2]
    gu, gv = grad_2d[:, 0], grad_2d[:, 1]
    G = np.stack([gu * K.fx / Z, gv * K.fy / Z, -(gu * K.fx * X + gv * K.fy * Y) / (Z * Z)], axis=1)
    R = pose.R
    # Xc = (Xo - c) @ R  =>  dL/dR = (Xo - c).T @ G
    GR = (mesh.vertices - pose.c).T @ G
    dRa, dRe = rotation_derivatives(pose.azimuth, pose.elevation)
    g_c = -(G @ R.T).sum(axis=0)
    return PoseGradient(float(np.sum(GR * dRa)), float(np.sum(GR * dRe)), g_c)


def render_silhouette(mesh: TriangleMesh, pose: PoseParams, K: CameraIntrinsics,
                      cfg: RenderConfig = RenderConfig(), return_context: bool = False):
    """Soft silhouette of ``mesh`` seen from ``pose``; an (H, W) array in [0, 1]."""
    if mesh.n_faces == 0:
        img = np.zeros(K.shape)
        return (img, None) if return_context else img
    Xc, pts = _project_mesh(mesh, pose, K, cfg.z_near)
    if not return_context:
        return rasterize(pts, mesh.faces, K.width, K.height, cfg.sigma, cfg.deterministic)
    img, ctx = rasterize(pts, mesh.faces, K.width, K.height, cfg.sigma, cfg.deterministic, True)
    return img, (ctx, Xc)


def backward_from_context(mesh, pose, K, context, adjoint) -> PoseGradient:
    if context is None:
        return PoseGradient(0.0, 0.0, np.zeros(3))
    ctx, Xc = context
    return pose_backward(mesh, pose, K, Xc, rasterize_backward(ctx, adjoint))


def render_backward(mesh: TriangleMesh, pose: PoseParams, K: CameraIntrinsics,
                    cfg: RenderConfig, adjoint) -> PoseGradient:
    """Pose gradient of ``sum(adjoint * render_silhouette(...))``."""
    _, context = render_silhouette(mesh, pose, K, cfg, return_context=True)
    return backward_from_context(mesh, pose, K, context, adjoint)
