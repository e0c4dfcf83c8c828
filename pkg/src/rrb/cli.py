"""Command-line interface.

Exit codes: 0 success, 2 usage or configuration error (including missing
files), 3 invalid input data, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

import numpy as np

from .camera import Box2, PoseParams
from .config import PerturbConfig, RunConfig
from .egomotion import Trajectory, ate, camera_box_iou, estimate_trajectory, pose_errors, rpe
from .errors import (ConfigError, DataError, DimensionMismatchError, EmptyMaskError,
                     NumericalError)
from .fileio import (binarize, format_trajectory, list_mask_files, pose_row, read_intrinsics,
                     read_pgm, read_trajectory, write_pgm, write_trace)
from .gradcheck import run_gradcheck
from .mesh import read_obj, write_obj
from .optimize import DIVERGED, huber_loss, optimize_pose, perturb_pose
from .raster import render_hard, render_silhouette
from .scale import infer_scale, mask_extent, scale_residuals

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _floats(text: str, n: int, flag: str) -> tuple[float, ...]:
    parts = text.split(",")
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{flag} expects {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{flag} expects {n} comma-separated finite numbers, got {text!r}")
    return vals


def _schedule(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sigma schedule {text!r}") from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--print-config", action="store_true",
                   help="print the effective configuration as JSON and exit")
    p.add_argument("--deterministic", action="store_true",
                   help="sequential reference evaluation order in the renderer")
    p.add_argument("--sigma", type=float, help="rasterizer sharpness in pixels (default 1.0)")
    p.add_argument("--seed", type=int, help="seed for every random choice (default 0)")


def _mesh_camera(p: argparse.ArgumentParser):
    p.add_argument("--mesh", required=True, help="OBJ mesh in the object frame")
    p.add_argument("--intrinsics", required=True, help="intrinsics file (key = value)")


def _pose_args(p: argparse.ArgumentParser, required: bool):
    for name in ("azimuth", "elevation"):
        p.add_argument(f"--{name}", type=float, required=required, help=f"{name} in degrees")
    for name in ("tx", "ty", "tz"):
        p.add_argument(f"--{name}", type=float, required=required,
                       help="camera center in the object frame, meters")
    p.add_argument("--lock-height", action=argparse.BooleanOptionalAction, default=True,
                   help="hold the camera height (ty) fixed while optimizing")


def _optim_args(p: argparse.ArgumentParser):
    p.add_argument("--binarize", dest="binarize", action=argparse.BooleanOptionalAction,
                   default=True, help="threshold reference masks at 128/255 (default on)")
    p.add_argument("--delta", type=float, help="Huber delta (default 1.0)")
    p.add_argument("--max-iters", type=int, help="iteration budget (default 300)")
    p.add_argument("--sigma-schedule", type=_schedule,
                   help="comma-separated sigmas run coarse to fine, e.g. 1.5,0.7,0.3,0.1")
    p.add_argument("--method", choices=("adam", "momentum"), help="first-order method")
    p.add_argument("--perturb", help="az,el,t magnitudes: start from a seeded random "
                                     "perturbation of the given pose")
    p.add_argument("--fit-scale", action="store_true",
                   help="infer the mesh scale from the mask (or --bbox) before optimizing")
    p.add_argument("--bbox", help="umin,vmin,umax,vmax reference box for --fit-scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rrb", description="Silhouette render-and-compare pose tools.")
    parser.add_argument("--print-config", action="store_true",
                        help="print the default configuration as JSON and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("render", help="render a silhouette to PGM")
    _mesh_camera(p)
    _pose_args(p, required=True)
    _common(p)
    p.add_argument("--hard", action="store_true", help="binary point-in-triangle render instead")
    p.add_argument("--out", required=True, help="output PGM path")

    p = sub.add_parser("estimate-pose", help="refine a pose against a mask")
    _mesh_camera(p)
    p.add_argument("--mask", required=True, help="reference PGM mask")
    _pose_args(p, required=True)
    _common(p)
    _optim_args(p)
    p.add_argument("--trace", help="write the per-iteration trace CSV here")
    p.add_argument("--out", help="write the final pose as a one-frame trajectory CSV")

    p = sub.add_parser("infer-scale", help="fit the mesh scale to a 2D box")
    _mesh_camera(p)
    p.add_argument("--mask", help="mask whose foreground box is the target")
    p.add_argument("--bbox", help="umin,vmin,umax,vmax target box")
    _pose_args(p, required=True)
    _common(p)
    p.add_argument("--out", help="write the scaled mesh as OBJ")

    p = sub.add_parser("egomotion", help="chain pose refinement over a mask sequence")
    _mesh_camera(p)
    p.add_argument("--mask-dir", required=True, help="directory of NNNN.pgm masks")
    _pose_args(p, required=True)
    _common(p)
    _optim_args(p)
    p.add_argument("--out", help="trajectory CSV path (default: standard output)")

    p = sub.add_parser("eval", help="compare an estimated trajectory with ground truth")
    p.add_argument("--est", required=True, help="estimated trajectory CSV")
    p.add_argument("--gt", required=True, help="reference trajectory CSV")
    p.add_argument("--ate", action="store_true", help="absolute trajectory error")
    p.add_argument("--rpe", action="store_true", help="relative pose error")
    p.add_argument("--rpe-delta", type=int, default=1, help="frame offset for RPE (default 1)")
    p.add_argument("--pose-errors", action="store_true", help="per-frame angle/translation errors")
    p.add_argument("--iou", action="store_true", help="camera-frame 3D box IoU (needs --mesh)")
    p.add_argument("--mesh", help="mesh for --iou")
    p.add_argument("--print-config", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--deterministic", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("gradcheck", help="finite-difference audit of the analytic gradient")
    p.add_argument("--scenes", type=int, help="number of random scenes (default 100)")
    p.add_argument("--seed", type=int, help="scene seed (default 0)")
    p.add_argument("--print-config", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--deterministic", action="store_true", help=argparse.SUPPRESS)
    return parser


def config_from_args(args) -> RunConfig:
    """Overlay command-line flags on the defaults."""
    cfg = RunConfig()
    try:
        render = cfg.render
        if getattr(args, "sigma", None) is not None:
            render = replace(render, sigma=args.sigma)
        if getattr(args, "deterministic", False):
            render = replace(render, deterministic=True)
        opt = cfg.optimizer
        for flag, fld in (("delta", "huber_delta"), ("max_iters", "max_iters"),
                          ("sigma_schedule", "sigma_schedule"), ("method", "method")):
            val = getattr(args, flag, None)
            if val is not None:
                opt = replace(opt, **{fld: val})
        perturb = cfg.perturb
        if getattr(args, "perturb", None):
            az, el, t = _floats(args.perturb, 3, "--perturb")
            perturb = PerturbConfig(az, el, t)
        gc = cfg.gradcheck
        if getattr(args, "scenes", None) is not None:
            gc = replace(gc, n_scenes=args.scenes)
        seed = cfg.seed if getattr(args, "seed", None) is None else args.seed
        if getattr(args, "seed", None) is not None:
            gc = replace(gc, seed=args.seed)
        return replace(cfg, render=render, optimizer=opt, perturb=perturb, gradcheck=gc,
                       lock_height=getattr(args, "lock_height", cfg.lock_height),
                       binarize=getattr(args, "binarize", cfg.binarize), seed=seed)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _given_pose(args, cfg: RunConfig) -> PoseParams:
    try:
        return PoseParams.from_degrees(args.azimuth, args.elevation, (args.tx, args.ty, args.tz),
                                       cfg.lock_height)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _read_mask(path, cfg: RunConfig) -> np.ndarray:
    m = read_pgm(path)
    return binarize(m) if cfg.binarize else m


def _check_mask(mask, K, name):
    if mask.shape != K.shape:
        raise DimensionMismatchError(f"{name}: mask is {mask.shape[1]}x{mask.shape[0]}, camera is {K.width}x{K.height}")
    if not np.any(mask >= 0.5):
        raise EmptyMaskError(f"{name}: mask has no foreground pixel")


def _bbox(text) -> Box2:
    try:
        return Box2(*_floats(text, 4, "--bbox"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _initial_pose(args, cfg, mesh):
    given = _given_pose(args, cfg)
    if args.perturb:
        p = cfg.perturb
        return given, perturb_pose(given, p.azimuth_deg, p.elevation_deg, p.translation_m,
                                   seed=cfg.seed, pivot=mesh.centroid())
    return given, given


def _fit_scale(mesh, pose, K, box, cfg: RunConfig):
    s = cfg.scale
    return infer_scale(mesh, pose, K, box, s.tol, s.max_steps, s.s_lo, s.s_hi, cfg.render.z_near)


def cmd_render(args, cfg: RunConfig, out) -> int:
    mesh = read_obj(args.mesh)
    K = read_intrinsics(args.intrinsics)
    pose = _given_pose(args, cfg)
    img = render_hard(mesh, pose, K, cfg.render.z_near) if args.hard else render_silhouette(mesh, pose, K, cfg.render)
    write_pgm(img, args.out)
    return EXIT_OK


def cmd_estimate_pose(args, cfg: RunConfig, out) -> int:
    mesh = read_obj(args.mesh)
    K = read_intrinsics(args.intrinsics)
    mask = _read_mask(args.mask, cfg)
    _check_mask(mask, K, args.mask)
    given, init = _initial_pose(args, cfg, mesh)
    if args.fit_scale:
        box = _bbox(args.bbox) if args.bbox else mask_extent(mask)
        s, mesh = _fit_scale(mesh, init, K, box, cfg)
        print(f"# scale {s!r}", file=out)
    best, trace = optimize_pose(mesh, init, K, mask, cfg.render, cfg.optimizer)
    if args.trace:
        write_trace(trace, cfg.optimizer.huber_delta, args.trace)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(format_trajectory(Trajectory([0], [best])))
    final_sigma = (cfg.optimizer.sigma_schedule or (cfg.render.sigma,))[-1]
    loss, _ = huber_loss(render_silhouette(mesh, best, K, replace(cfg.render, sigma=final_sigma)),
                         mask, cfg.optimizer.huber_delta)
    ea, ee, et = pose_errors(best, given)
    print("azimuth_deg,elevation_deg,tx,ty,tz", file=out)
    print(",".join(pose_row(best)), file=out)
    print(f"# loss {loss!r} status {trace.status} iterations {len(trace.records) - 1}", file=out)
    print(f"# errors_vs_given azimuth_deg {ea!r} elevation_deg {ee!r} translation_m {et!r}", file=out)
    if trace.status == DIVERGED:
        print(f"rrb: optimization diverged: {trace.message}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_infer_scale(args, cfg: RunConfig, out) -> int:
    mesh = read_obj(args.mesh)
    K = read_intrinsics(args.intrinsics)
    pose = _given_pose(args, cfg)
    if args.bbox:
        box = _bbox(args.bbox)
    elif args.mask:
        mask = binarize(read_pgm(args.mask))
        _check_mask(mask, K, args.mask)
        box = mask_extent(mask)
    else:
        raise ConfigError("infer-scale needs --bbox or --mask")
    s, scaled = _fit_scale(mesh, pose, K, box, cfg)
    dh, dw = scale_residuals(scaled, pose, K, box, cfg.render.z_near)
    print(f"scale {s!r}", file=out)
    print(f"# height_residual_px {dh!r} width_residual_px {dw!r}", file=out)
    if args.out:
        write_obj(scaled, args.out)
    return EXIT_OK


def cmd_egomotion(args, cfg: RunConfig, out) -> int:
    mesh = read_obj(args.mesh)
    K = read_intrinsics(args.intrinsics)
    files = list_mask_files(args.mask_dir)
    if not files:
        raise DataError(f"no NNNN.pgm masks in {args.mask_dir}")
    masks = []
    for _, path in files:
        m = _read_mask(path, cfg)
        _check_mask(m, K, path)
        masks.append(m)
    _, init = _initial_pose(args, cfg, mesh)
    box = _bbox(args.bbox) if args.bbox else None
    res = estimate_trajectory(masks, mesh, K, init, cfg.render, cfg.optimizer,
                              frame_ids=[i for i, _ in files], fit_scale=args.fit_scale, ref_box0=box)
    text = format_trajectory(res.trajectory)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    if args.fit_scale:
        print(f"# scale {res.scale!r}", file=sys.stderr)
    if not res.ok:
        print(f"rrb: frame {res.failed_frame} diverged, trajectory truncated: {res.message}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig, out) -> int:
    est = read_trajectory(args.est)
    gt = read_trajectory(args.gt)
    if args.iou and not args.mesh:
        raise ConfigError("--iou needs --mesh")
    if est.frame_ids != gt.frame_ids:
        # checked here so every metric reports the same way
        ate(est, gt)
    everything = not (args.ate or args.rpe or args.pose_errors or args.iou)
    if args.ate or everything:
        print(f"ate_aligned_m {ate(est, gt, align=True).ate_rmse!r}", file=out)
        print(f"ate_raw_m {ate(est, gt, align=False).ate_rmse!r}", file=out)
    if args.rpe or everything:
        if args.rpe_delta < 1:
            raise ConfigError("--rpe-delta must be >= 1")
        if len(est) > args.rpe_delta:
            print(f"rpe_m {rpe(est, gt, args.rpe_delta).rpe_rmse!r}", file=out)
        elif args.rpe:
            rpe(est, gt, args.rpe_delta)  # raises the too-short error
    if args.pose_errors or everything:
        errs = np.array([pose_errors(e, g) for e, g in zip(est.poses, gt.poses)])
        print("frame,azimuth_err_deg,elevation_err_deg,translation_err_m", file=out)
        for fid, (a, e, t) in zip(est.frame_ids, errs.tolist()):
            print(f"{fid},{a!r},{e!r},{t!r}", file=out)
        med = np.median(errs, axis=0).tolist()
        print(f"# median azimuth_err_deg {med[0]!r} elevation_err_deg {med[1]!r} translation_err_m {med[2]!r}",
              file=out)
    if args.iou or (everything and args.mesh):
        mesh = read_obj(args.mesh)
        ious = [camera_box_iou(mesh, e, g) for e, g in zip(est.poses, gt.poses)]
        print(f"iou_3d_mean {float(np.mean(ious))!r}", file=out)
        print(f"iou_3d_median {float(np.median(ious))!r}", file=out)
    return EXIT_OK


def cmd_gradcheck(args, cfg: RunConfig, out) -> int:
    rep = run_gradcheck(cfg.gradcheck)
    n = len(rep.checks)
    print(f"scenes {cfg.gradcheck.n_scenes} seed {cfg.gradcheck.seed} checks {n} "
          f"excused_near_locus {len(rep.excused)} max_rel_error {rep.max_rel_error:.3e} "
          f"rtol {cfg.gradcheck.rtol:g}", file=out)
    for c in rep.failures:
        print(f"FAIL scene {c.scene} {c.name} analytic {c.analytic:.9e} numeric {c.numeric:.9e} "
              f"rel {c.rel_error:.3e}", file=out)
    print("PASS" if rep.passed else "FAIL", file=out)
    return EXIT_OK if rep.passed else EXIT_NUMERIC


COMMANDS = {
    "render": cmd_render,
    "estimate-pose": cmd_estimate_pose,
    "infer-scale": cmd_infer_scale,
    "egomotion": cmd_egomotion,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.print_config:
            print(cfg.to_json(), file=out)
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](args, cfg, out)
    except (ConfigError, OSError) as exc:
        print(f"rrb: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"rrb: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"rrb: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
