import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

import rrb
from conftest import GOLDEN_CENTER, GOLDEN_DIR
from rrb.cli import main
from rrb.fileio import read_trajectory, write_pgm

MESH = rrb.data_path("cube.obj")
CAMERA = rrb.data_path("camera64.txt")
POSE = ["--azimuth", "30", "--elevation", "-20", "--tx", str(GOLDEN_CENTER[0]),
        "--ty", str(GOLDEN_CENTER[1]), "--tz", str(GOLDEN_CENTER[2])]
SCENE = ["--mesh", MESH, "--intrinsics", CAMERA, *POSE]


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def _render(path, *extra):
    code, _ = run("render", *SCENE, "--deterministic", "--out", path, *extra)
    assert code == 0


def _bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


# render

def test_render_matches_golden(tmp_path):
    _render(tmp_path / "m.pgm")
    assert _bytes(tmp_path / "m.pgm") == _bytes(os.path.join(GOLDEN_DIR, "cube_sigma1.pgm"))


@pytest.mark.parametrize("sigma,name", [("0.01", "cube_sigma0.01.pgm")])
def test_render_matches_sharp_golden(tmp_path, sigma, name):
    _render(tmp_path / "m.pgm", "--sigma", sigma)
    assert _bytes(tmp_path / "m.pgm") == _bytes(os.path.join(GOLDEN_DIR, name))


def test_render_hard_matches_golden(tmp_path):
    _render(tmp_path / "m.pgm", "--hard")
    assert _bytes(tmp_path / "m.pgm") == _bytes(os.path.join(GOLDEN_DIR, "cube_hard.pgm"))


def test_render_missing_file(tmp_path, capsys):
    code, _ = run("render", "--mesh", tmp_path / "nope.obj", "--intrinsics", CAMERA, *POSE,
                  "--out", tmp_path / "m.pgm")
    assert code == 2
    assert "nope.obj" in capsys.readouterr().err


@pytest.mark.parametrize("sigma", ["0", "-1"])
def test_render_bad_sigma(tmp_path, sigma, capsys):
    code, _ = run("render", *SCENE, "--sigma", sigma, "--out", tmp_path / "m.pgm")
    assert code == 2
    assert "sigma" in capsys.readouterr().err
    assert not (tmp_path / "m.pgm").exists()


def test_render_behind_camera_is_data_error(tmp_path):
    code, _ = run("render", "--mesh", MESH, "--intrinsics", CAMERA, "--azimuth", "0", "--elevation", "0",
                  "--tx", "0", "--ty", "0", "--tz", "0", "--out", tmp_path / "m.pgm")
    assert code == 3


def test_missing_required_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("render", "--mesh", MESH)
    assert exc.value.code == 2


# estimate-pose

def test_estimate_pose_self_consistency(tmp_path):
    _render(tmp_path / "m.pgm")
    code, out = run("estimate-pose", *SCENE, "--mask", tmp_path / "m.pgm", "--deterministic",
                    "--trace", tmp_path / "trace.csv", "--out", tmp_path / "pose.csv")
    assert code == 0
    assert "# errors_vs_given azimuth_deg 0.0 elevation_deg 0.0 translation_m 0.0" in out
    assert out.splitlines()[0] == "azimuth_deg,elevation_deg,tx,ty,tz"
    assert read_trajectory(tmp_path / "pose.csv").frame_ids == (0,)
    assert _bytes(tmp_path / "trace.csv").startswith(b"# huber_delta=1.0 normalization=mean")


def test_estimate_pose_perturbed_start_improves(tmp_path):
    _render(tmp_path / "m.pgm")
    code, out = run("estimate-pose", *SCENE, "--mask", tmp_path / "m.pgm", "--deterministic",
                    "--perturb", "10,5,0.1", "--seed", "3", "--trace", tmp_path / "trace.csv")
    assert code == 0
    rows = _bytes(tmp_path / "trace.csv").decode().splitlines()[2:]
    losses = [float(r.split(",")[1]) for r in rows]
    assert min(losses) < 0.5 * losses[0]


def test_estimate_pose_empty_mask(tmp_path, capsys):
    write_pgm(np.zeros((64, 64)), tmp_path / "empty.pgm")
    code, _ = run("estimate-pose", *SCENE, "--mask", tmp_path / "empty.pgm")
    assert code == 3
    assert "no foreground" in capsys.readouterr().err


def test_estimate_pose_wrong_mask_size(tmp_path):
    write_pgm(np.ones((10, 10)), tmp_path / "small.pgm")
    code, _ = run("estimate-pose", *SCENE, "--mask", tmp_path / "small.pgm")
    assert code == 3


def test_estimate_pose_bad_perturb_flag(tmp_path):
    _render(tmp_path / "m.pgm")
    code, _ = run("estimate-pose", *SCENE, "--mask", tmp_path / "m.pgm", "--perturb", "1,2")
    assert code == 2


# infer-scale

def test_infer_scale_on_own_render(tmp_path):
    _render(tmp_path / "m.pgm", "--hard")
    code, out = run("infer-scale", *SCENE, "--mask", tmp_path / "m.pgm", "--out", tmp_path / "s.obj")
    assert code == 0
    s = float(out.splitlines()[0].split()[1])
    assert s == pytest.approx(1.0, abs=0.05)
    assert (tmp_path / "s.obj").exists()


def test_infer_scale_needs_a_target():
    assert run("infer-scale", *SCENE)[0] == 2


def test_infer_scale_unreachable_box():
    assert run("infer-scale", *SCENE, "--bbox", "30,30,30.1,30.1")[0] == 4


# egomotion

def test_egomotion_single_mask(tmp_path):
    d = tmp_path / "masks"
    d.mkdir()
    _render(d / "0003.pgm")
    code, out = run("egomotion", *SCENE, "--mask-dir", d, "--deterministic", "--max-iters", "20")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "frame,azimuth_deg,elevation_deg,tx,ty,tz"
    assert len(lines) == 2 and lines[1].startswith("3,")


def test_egomotion_keeps_frame_numbers(tmp_path):
    d = tmp_path / "masks"
    d.mkdir()
    for name in ("0002.pgm", "0007.pgm", "0011.pgm"):
        _render(d / name)
    code, _ = run("egomotion", *SCENE, "--mask-dir", d, "--deterministic", "--max-iters", "20",
                  "--out", tmp_path / "t.csv")
    assert code == 0
    assert read_trajectory(tmp_path / "t.csv").frame_ids == (2, 7, 11)


def test_egomotion_empty_directory(tmp_path):
    assert run("egomotion", *SCENE, "--mask-dir", tmp_path)[0] == 3


# eval

def _write_csv(path, rows):
    path.write_text("frame,azimuth_deg,elevation_deg,tx,ty,tz\n" +
                    "".join(",".join(str(v) for v in r) + "\n" for r in rows))


ROWS = [(0, 10, -20, 0, -1, -3), (1, 11, -20, 0.5, -1, -3), (2, 12, -20, 1, -1, -2.5)]


def test_eval_identical(tmp_path):
    _write_csv(tmp_path / "a.csv", ROWS)
    code, out = run("eval", "--est", tmp_path / "a.csv", "--gt", tmp_path / "a.csv", "--mesh", MESH)
    assert code == 0
    vals = dict(line.split() for line in out.splitlines() if line.split()[0] in
                ("ate_aligned_m", "ate_raw_m", "rpe_m", "iou_3d_mean", "iou_3d_median"))
    assert vals == {"ate_aligned_m": "0.0", "ate_raw_m": "0.0", "rpe_m": "0.0",
                    "iou_3d_mean": "1.0", "iou_3d_median": "1.0"}
    for line in out.splitlines()[4:7]:
        assert line.endswith(",0.0,0.0,0.0")


def test_eval_offset(tmp_path):
    _write_csv(tmp_path / "gt.csv", ROWS)
    _write_csv(tmp_path / "est.csv", [(f, a, e, x + 0.1, y, z) for f, a, e, x, y, z in ROWS])
    code, out = run("eval", "--est", tmp_path / "est.csv", "--gt", tmp_path / "gt.csv", "--ate", "--rpe")
    assert code == 0
    vals = {k: float(v) for k, v in (line.split() for line in out.splitlines())}
    assert vals["ate_aligned_m"] == pytest.approx(0.0, abs=1e-10)
    assert vals["ate_raw_m"] == pytest.approx(0.1, abs=1e-10)
    assert vals["rpe_m"] == pytest.approx(0.0, abs=1e-10)


def test_eval_mismatched_frames(tmp_path):
    _write_csv(tmp_path / "a.csv", ROWS)
    _write_csv(tmp_path / "b.csv", [(f + 1, *r[1:]) for f, *r in [list(r) for r in ROWS]])
    assert run("eval", "--est", tmp_path / "a.csv", "--gt", tmp_path / "b.csv")[0] == 3


def test_eval_iou_needs_mesh(tmp_path):
    _write_csv(tmp_path / "a.csv", ROWS)
    assert run("eval", "--est", tmp_path / "a.csv", "--gt", tmp_path / "a.csv", "--iou")[0] == 2


# gradcheck and configuration

def test_gradcheck_zero_scenes():
    assert run("gradcheck", "--scenes", "0")[0] == 2


def test_gradcheck_seeded_report_is_reproducible():
    first = run("gradcheck", "--scenes", "4", "--seed", "5")
    assert first[0] == 0 and first[1].rstrip().endswith("PASS")
    assert run("gradcheck", "--scenes", "4", "--seed", "5") == first


def test_print_config():
    code, out = run("--print-config")
    cfg = json.loads(out)
    assert code == 0
    assert cfg["optimizer"]["huber_delta"] == 1.0 and cfg["render"]["sigma"] == 1.0
    assert cfg["perturb"]["azimuth_deg"] == 61.174


def test_print_config_reflects_flags():
    code, out = run("estimate-pose", *SCENE, "--mask", "unused.pgm", "--sigma", "0.5", "--delta", "0.2",
                    "--perturb", "5,2,0.1", "--no-lock-height", "--print-config")
    cfg = json.loads(out)
    assert code == 0
    assert cfg["render"]["sigma"] == 0.5 and cfg["optimizer"]["huber_delta"] == 0.2
    assert cfg["perturb"]["translation_m"] == 0.1 and cfg["lock_height"] is False


def test_no_command_is_usage_error():
    assert run()[0] == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rrb", "render", *SCENE, "--deterministic",
                           "--out", str(tmp_path / "m.pgm")], capture_output=True)
    assert proc.returncode == 0, proc.stderr
    assert _bytes(tmp_path / "m.pgm") == _bytes(os.path.join(GOLDEN_DIR, "cube_sigma1.pgm"))


def test_commands_are_deterministic(tmp_path):
    _render(tmp_path / "m.pgm")
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        outs.append(run("estimate-pose", *SCENE, "--mask", tmp_path / "m.pgm", "--deterministic",
                        "--perturb", "20,8,0.2", "--seed", "9", "--max-iters", "40",
                        "--trace", d / "trace.csv", "--out", d / "pose.csv"))
    assert outs[0] == outs[1]
    for name in ("trace.csv", "pose.csv"):
        assert _bytes(tmp_path / "run0" / name) == _bytes(tmp_path / "run1" / name)
