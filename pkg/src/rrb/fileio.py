"""Text and image formats: intrinsics files, binary PGM masks, pose CSVs.

Angles are degrees in every file and radians in memory.
"""
from __future__ import annotations

import csv
import io
import math
import os
import re

import numpy as np

from .camera import CameraIntrinsics, PoseParams
from .errors import DataError
from .egomotion import Trajectory
from .optimize import OptimizationTrace

INTRINSICS_KEYS = ("fx", "fy", "cx", "cy", "width", "height")
TRAJECTORY_HEADER = ("frame", "azimuth_deg", "elevation_deg", "tx", "ty", "tz")
TRACE_HEADER = ("iter", "loss", "azimuth_deg", "elevation_deg", "tx", "ty", "tz")
_MASK_NAME = re.compile(r"^(\d+)\.pgm$")


# intrinsics

def parse_intrinsics(text: str) -> CameraIntrinsics:
    vals = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep:
            raise DataError(f"intrinsics line {lineno}: expected 'key = value'")
        if key not in INTRINSICS_KEYS:
            raise DataError(f"intrinsics line {lineno}: unknown key {key!r}")
        if key in vals:
            raise DataError(f"intrinsics line {lineno}: duplicate key {key!r}")
        try:
            vals[key] = float(value)
        except ValueError:
            raise DataError(f"intrinsics line {lineno}: {key} is not a number") from None
    missing = [k for k in INTRINSICS_KEYS if k not in vals]
    if missing:
        raise DataError(f"intrinsics missing keys: {', '.join(missing)}")
    for k in ("width", "height"):
        if vals[k] != int(vals[k]):
            raise DataError(f"intrinsics {k} must be an integer")
    try:
        return CameraIntrinsics(vals["fx"], vals["fy"], vals["cx"], vals["cy"],
                                int(vals["width"]), int(vals["height"]))
    except ValueError as exc:
        raise DataError(f"invalid intrinsics: {exc}") from None


def read_intrinsics(path) -> CameraIntrinsics:
    with open(path) as fh:
        return parse_intrinsics(fh.read())


def format_intrinsics(K: CameraIntrinsics) -> str:
    return "".join(f"{k} = {getattr(K, k)!r}\n" for k in INTRINSICS_KEYS)


def write_intrinsics(K: CameraIntrinsics, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_intrinsics(K))


# PGM

def quantize(image) -> np.ndarray:
    """Map values in [0, 1] to bytes as round(255 * S), halves rounding up."""
    S = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    return np.floor(255.0 * S + 0.5).astype(np.uint8)


def encode_pgm(image) -> bytes:
    q = quantize(image)
    if q.ndim != 2:
        raise DataError("PGM image must be two-dimensional")
    h, w = q.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes()


def write_pgm(image, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(image))


def _header_tokens(buf: bytes, n: int):
    """First ``n`` whitespace-separated header tokens, skipping comments; returns (tokens, offset)."""
    toks, i = [], 0
    while len(toks) < n:
        while i < len(buf) and buf[i:i + 1].isspace():
            i += 1
        if i >= len(buf):
            raise DataError("truncated PGM header")
        if buf[i:i + 1] == b"#":
            while i < len(buf) and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(buf) and not buf[j:j + 1].isspace() and buf[j:j + 1] != b"#":
            j += 1
        toks.append(buf[i:j].decode("ascii", "replace"))
        i = j
    return toks, i + 1  # exactly one whitespace byte precedes the raster


def decode_pgm(buf: bytes) -> np.ndarray:
    """Binary 8-bit PGM to float values v / maxval in [0, 1]."""
    toks, off = _header_tokens(buf, 4)
    if toks[0] != "P5":
        raise DataError(f"not a binary PGM (magic {toks[0]!r})")
    try:
        w, h, maxval = (int(t) for t in toks[1:])
    except ValueError:
        raise DataError("malformed PGM header") from None
    if w < 1 or h < 1 or not 1 <= maxval <= 255:
        raise DataError("PGM must be at least 1x1 with maxval in [1, 255]")
    data = buf[off:off + w * h]
    if len(data) != w * h:
        raise DataError(f"PGM raster has {len(data)} bytes, expected {w * h}")
    v = np.frombuffer(data, dtype=np.uint8).reshape(h, w).astype(np.float64)
    if v.max() > maxval:
        raise DataError("PGM sample exceeds maxval")
    return v / maxval


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def binarize(image) -> np.ndarray:
    """Foreground where the 8-bit value would be >= 128."""
    return (quantize(image) >= 128).astype(np.float64)


def list_mask_files(directory) -> list[tuple[int, str]]:
    """(frame id, path) for every ``NNNN.pgm`` in ``directory``, in numeric order."""
    found = []
    for name in os.listdir(directory):
        m = _MASK_NAME.match(name)
        if m:
            found.append((int(m.group(1)), os.path.join(directory, name)))
    found.sort()
    ids = [i for i, _ in found]
    if len(set(ids)) != len(ids):
        raise DataError("two mask files share a frame number")
    return found


# CSV

def _num(x: float) -> str:
    return repr(float(x))


def pose_row(pose: PoseParams) -> list[str]:
    tx, ty, tz = pose.translation
    return [_num(pose.azimuth_deg), _num(pose.elevation_deg), _num(tx), _num(ty), _num(tz)]


def format_trajectory(traj: Trajectory) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for fid, pose in traj:
        w.writerow([fid, *pose_row(pose)])
    return out.getvalue()


def write_trajectory(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_trajectory(traj))


def parse_trajectory(text: str, height_locked: bool = True) -> Trajectory:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if not rows or tuple(c.strip() for c in rows[0]) != TRAJECTORY_HEADER:
        raise DataError(f"trajectory CSV must start with header {','.join(TRAJECTORY_HEADER)}")
    ids, poses = [], []
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != len(TRAJECTORY_HEADER):
            raise DataError(f"trajectory row {n}: expected {len(TRAJECTORY_HEADER)} fields")
        try:
            fid = int(r[0])
            az, el, tx, ty, tz = (float(x) for x in r[1:])
        except ValueError:
            raise DataError(f"trajectory row {n}: non-numeric field") from None
        if not all(math.isfinite(v) for v in (az, el, tx, ty, tz)):
            raise DataError(f"trajectory row {n}: non-finite value")
        try:
            poses.append(PoseParams.from_degrees(az, el, (tx, ty, tz), height_locked))
        except ValueError as exc:
            raise DataError(f"trajectory row {n}: {exc}") from None
        ids.append(fid)
    return Trajectory(ids, poses)


def read_trajectory(path, height_locked: bool = True) -> Trajectory:
    with open(path, newline="") as fh:
        return parse_trajectory(fh.read(), height_locked)


def format_trace(trace: OptimizationTrace, huber_delta: float) -> str:
    out = io.StringIO()
    out.write(f"# huber_delta={huber_delta!r} normalization=mean status={trace.status}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in trace.records:
        w.writerow([r.iter, _num(r.loss), *pose_row(r.pose)])
    return out.getvalue()


def write_trace(trace: OptimizationTrace, huber_delta: float, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_trace(trace, huber_delta))
