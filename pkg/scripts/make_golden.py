"""Regenerate the checked-in golden PGMs for the bundled cube.

Renders go through the sequential deterministic path, so the files are
reproducible byte for byte. Run from the repository root:

    python scripts/make_golden.py [--out tests/golden]
"""
import argparse
import os

import rrb
from rrb.camera import PoseParams
from rrb.fileio import read_intrinsics, write_pgm
from rrb.raster import RenderConfig, render_hard, render_silhouette

# documented golden pose: degrees and meters
GOLDEN_POSE = dict(azimuth_deg=30.0, elevation_deg=-20.0, c=(-1.4, -1.0, -2.4))
GOLDEN_SIGMAS = (1.0, 0.01)


def golden_scene():
    mesh = rrb.read_obj(rrb.data_path("cube.obj"))
    K = read_intrinsics(rrb.data_path("camera64.txt"))
    pose = PoseParams.from_degrees(GOLDEN_POSE["azimuth_deg"], GOLDEN_POSE["elevation_deg"],
                                   GOLDEN_POSE["c"])
    return mesh, K, pose


def golden_name(sigma: float) -> str:
    return f"cube_sigma{sigma:g}.pgm"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join("tests", "golden"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    mesh, K, pose = golden_scene()
    for sigma in GOLDEN_SIGMAS:
        img = render_silhouette(mesh, pose, K, RenderConfig(sigma=sigma, deterministic=True))
        path = os.path.join(args.out, golden_name(sigma))
        write_pgm(img, path)
        print("wrote", path)
    path = os.path.join(args.out, "cube_hard.pgm")
    write_pgm(render_hard(mesh, pose, K), path)
    print("wrote", path)


if __name__ == "__main__":
    main()
