"""Huber silhouette loss and first-order pose refinement."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import CameraIntrinsics, PoseParams, rotation_derivatives, rotation_from_view
from .errors import DataError, DimensionMismatchError
from .mesh import TriangleMesh
from .raster import RenderConfig, backward_from_context, render_silhouette

# mean viewpoint-network errors (degrees); the translation magnitude is our own choice
VIEWNET_AZIMUTH_DEG = 61.174
VIEWNET_ELEVATION_DEG = 17.604
DEFAULT_TRANSLATION_PERTURB = 0.5

CONVERGED = "converged"
MAX_ITERS = "max-iters"
DIVERGED = "diverged"


@dataclass(frozen=True)
class OptimizerOptions:
    method: str = "adam"  # "adam" | "momentum"
    lr_angle: float = 2e-2
    lr_translation: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    momentum: float = 0.9
    eps: float = 1e-8
    max_iters: int = 300
    tol: float = 1e-6
    window: int = 10
    huber_delta: float = 1.0
    # divergence: loss > 10 * max(initial loss, divergence_floor)
    divergence_floor: float = 1e-2
    # empty -> single stage at the render config's sigma
    sigma_schedule: tuple[float, ...] = ()

    def __post_init__(self):
        if self.method not in ("adam", "momentum"):
            raise ValueError(f"unknown optimizer method {self.method!r}")
        if not (self.lr_angle > 0 and self.lr_translation > 0):
            raise ValueError("step sizes must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.huber_delta > 0:
            raise ValueError("huber_delta must be positive")
        if any(not s > 0 for s in self.sigma_schedule):
            raise ValueError("sigma schedule entries must be positive")


@dataclass
class TraceRecord:
    iter: int
    loss: float
    pose: PoseParams
    sigma: float


@dataclass
class OptimizationTrace:
    records: list[TraceRecord] = field(default_factory=list)
    status: str = MAX_ITERS
    failed_pose: PoseParams | None = None
    message: str = ""

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.records]


def huber_loss(rendered, reference, delta: float = 1.0):
    """Mean Huber penalty of ``rendered - reference`` and its adjoint."""
    a = np.asarray(rendered, dtype=np.float64)
    b = np.asarray(reference, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    r = a - b
    ar = np.abs(r)
    rho = np.where(ar <= delta, 0.5 * r * r, delta * (ar - 0.5 * delta))
    n = r.size
    return float(rho.sum() / n), np.clip(r, -delta, delta) / n


def loss_and_grad(mesh: TriangleMesh, pose: PoseParams, K: CameraIntrinsics, reference,
                  cfg: RenderConfig = RenderConfig(), delta: float = 1.0):
    """Huber loss at ``pose`` and its gradient over the free pose parameters."""
    ref = np.asarray(reference, dtype=np.float64)
    if ref.shape != K.shape:
        raise DimensionMismatchError(f"reference shape {ref.shape} != camera {K.shape}")
    img, ctx = render_silhouette(mesh, pose, K, cfg, return_context=True)
    loss, adj = huber_loss(img, ref, delta)
    g = backward_from_context(mesh, pose, K, ctx, adj)
    return loss, g.free_vector(pose.height_locked)


class _Adam:
    def __init__(self, lr, b1, b2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = np.zeros_like(lr)
        self.v = np.zeros_like(lr)
        self.t = 0

    def step(self, g):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        mhat = self.m / (1 - self.b1 ** self.t)
        vhat = self.v / (1 - self.b2 ** self.t)
        return self.lr * mhat / (np.sqrt(vhat) + self.eps)


class _Momentum:
    def __init__(self, lr, mu):
        self.lr, self.mu = lr, mu
        self.vel = np.zeros_like(lr)

    def step(self, g):
        self.vel = self.mu * self.vel + g
        return self.lr * self.vel


class ObjectChart:
    """Object-centred coordinates for pose updates.

    The raw parameters (azimuth, elevation, c) couple badly: turning the
    camera about its own center swings the object across the image. The
    chart uses q = (azimuth, elevation, t) with t = R.T (pivot - c), the
    pivot's position in the camera frame, so angle steps rotate the view
    about the object. With a locked height, t_y is solved from c_y = const
    and q = (azimuth, elevation, t_x, t_z).
    """

    def __init__(self, pivot, height_locked: bool, height: float):
        self.p = np.asarray(pivot, dtype=np.float64)
        self.locked = height_locked
        self.h = height

    def _ty(self, R, tx, tz):
        return (self.p[1] - self.h - R[1, 0] * tx - R[1, 2] * tz) / R[1, 1]

    def to_q(self, pose: PoseParams) -> np.ndarray:
        t = pose.R.T @ (self.p - pose.c)
        if self.locked:
            return np.array([pose.azimuth, pose.elevation, t[0], t[2]])
        return np.array([pose.azimuth, pose.elevation, *t])

    def _t(self, q, R):
        if self.locked:
            return np.array([q[2], self._ty(R, q[2], q[3]), q[3]])
        return np.asarray(q[2:5], dtype=np.float64)

    def to_pose(self, q, template: PoseParams) -> PoseParams:
        el = min(max(float(q[1]), -math.pi / 2), math.pi / 2)
        R = rotation_from_view(q[0], el)
        c = self.p - R @ self._t(q, R)
        if self.locked:
            c[1] = self.h
        return replace(template, azimuth=float(q[0]), elevation=el, translation=tuple(c))

    def pullback(self, q, g_full) -> np.ndarray:
        """Map (d/da, d/de, d/dc) at the pose of ``q`` to d/dq."""
        R = rotation_from_view(q[0], q[1])
        Ra, Re = rotation_derivatives(q[0], q[1])
        t = self._t(q, R)
        ga, ge, gc = g_full[0], g_full[1], np.asarray(g_full[2:5])
        if not self.locked:
            return np.array([ga - gc @ (Ra @ t), ge - gc @ (Re @ t), *(-(R.T @ gc))])
        col = R[:, 1] / R[1, 1]
        dca = -(Ra @ t) + col * (Ra @ t)[1]
        dce = -(Re @ t) + col * (Re @ t)[1]
        dcx = -R[:, 0] + col * R[1, 0]
        dcz = -R[:, 2] + col * R[1, 2]
        return np.array([ga + gc @ dca, ge + gc @ dce, gc @ dcx, gc @ dcz])


def _full_grad(mesh, pose, K, reference, cfg, delta):
    img, ctx = render_silhouette(mesh, pose, K, cfg, return_context=True)
    loss, adj = huber_loss(img, reference, delta)
    g = backward_from_context(mesh, pose, K, ctx, adj)
    return loss, np.array([g.azimuth, g.elevation, *g.translation])


def _make_stepper(opts: OptimizerOptions, n_free: int):
    lr = np.full(n_free, opts.lr_translation)
    lr[:2] = opts.lr_angle
    if opts.method == "adam":
        return _Adam(lr, opts.beta1, opts.beta2, opts.eps)
    return _Momentum(lr, opts.momentum)


def _stage_budgets(max_iters, n_stages):
    base, extra = divmod(max_iters, n_stages)
    return [base + (1 if i < extra else 0) for i in range(n_stages)]


def optimize_pose(mesh: TriangleMesh, init: PoseParams, K: CameraIntrinsics, reference,
                  cfg: RenderConfig = RenderConfig(), opts: OptimizerOptions = OptimizerOptions()):
    """Refine ``init`` so the rendered silhouette matches ``reference``.

    Steps are taken in the object-centred chart (see ObjectChart) with the
    mesh centroid as pivot. Returns the lowest-loss pose visited in the final
    sigma stage together with the trace. A render failure mid-run or a loss
    blow-up stops the run with status "diverged"; the best pose so far is
    still returned.
    """
    reference = np.asarray(reference, dtype=np.float64)
    if reference.shape != K.shape:
        raise DimensionMismatchError(f"reference shape {reference.shape} != camera {K.shape}")
    sigmas = tuple(opts.sigma_schedule) or (cfg.sigma,)
    chart = ObjectChart(mesh.centroid(), init.height_locked, init.translation[1])
    trace = OptimizationTrace()
    it = 0
    pose = init
    status = MAX_ITERS
    stage_cfg = cfg
    for sigma, budget in zip(sigmas, _stage_budgets(opts.max_iters, len(sigmas))):
        stage_cfg = replace(cfg, sigma=sigma)
        loss, g = _full_grad(mesh, pose, K, reference, stage_cfg, opts.huber_delta)
        if not trace.records:
            trace.records.append(TraceRecord(0, loss, pose, sigma))
            limit = 10.0 * max(loss, opts.divergence_floor)
        if loss == 0.0:
            # already at the global minimum; stepping could only drift away
            status = CONVERGED
            continue
        best_loss, best_pose = loss, pose
        history = [best_loss]
        q = chart.to_q(pose)
        stepper = _make_stepper(opts, len(q))
        status = MAX_ITERS
        for _ in range(budget):
            gq = chart.pullback(q, g)
            q = q - stepper.step(gq)
            cand = chart.to_pose(q, pose)
            try:
                loss, g = _full_grad(mesh, cand, K, reference, stage_cfg, opts.huber_delta)
            except DataError as exc:
                status = DIVERGED
                trace.failed_pose = cand
                trace.message = str(exc)
                break
            it += 1
            pose = cand
            q = chart.to_q(pose)
            trace.records.append(TraceRecord(it, loss, pose, sigma))
            if loss < best_loss:
                best_loss, best_pose = loss, pose
            if not math.isfinite(loss) or loss > limit:
                status = DIVERGED
                trace.failed_pose = pose
                trace.message = f"loss {loss:.6g} exceeded {limit:.6g}"
                break
            history.append(best_loss)
            if len(history) > opts.window and history[-1 - opts.window] - best_loss < opts.tol:
                status = CONVERGED
                break
        pose = best_pose
        if status == DIVERGED:
            break
    # best-visited contract also holds against the starting pose
    if pose is not init:
        l_init, _ = _full_grad(mesh, init, K, reference, stage_cfg, opts.huber_delta)
        l_best, _ = _full_grad(mesh, pose, K, reference, stage_cfg, opts.huber_delta)
        if l_init <= l_best:
            pose = init
    trace.status = status
    return pose, trace


def perturb_pose(gt: PoseParams, azimuth_deg: float = VIEWNET_AZIMUTH_DEG,
                 elevation_deg: float = VIEWNET_ELEVATION_DEG,
                 translation_m: float = DEFAULT_TRANSLATION_PERTURB, seed=None,
                 pivot=(0.0, 0.0, 0.0)) -> PoseParams:
    """Surrogate viewpoint estimate: uniform noise within +-magnitude per component.

    Angles and the pivot's camera-frame position (see ObjectChart) are
    perturbed independently, so the camera orbits the pivot as a viewpoint
    error would and the object stays in view. A locked camera height is known
    and is kept.
    """
    if azimuth_deg == 0 and elevation_deg == 0 and translation_m == 0:
        return gt
    rng = np.random.default_rng(seed)
    da, de = rng.uniform(-1.0, 1.0, size=2)
    dt = rng.uniform(-1.0, 1.0, size=3) * translation_m
    chart = ObjectChart(pivot, gt.height_locked, gt.translation[1])
    q = chart.to_q(gt)
    q[0] += math.radians(azimuth_deg) * da
    q[1] = min(max(q[1] + math.radians(elevation_deg) * de, -math.pi / 2), math.pi / 2)
    q[2:] += dt[[0, 2]] if gt.height_locked else dt
    return chart.to_pose(q, gt)
