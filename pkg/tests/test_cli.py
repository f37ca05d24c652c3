import subprocess
import sys

import numpy as np
import pytest

from eventrgbd.cli import main
from eventrgbd.io import read_event_csv, read_pbm, read_ppm, read_trigger_csv, write_ppm

SMALL = """\
camera.width = 80
camera.height = 60
camera.fx = 125
camera.fy = 125
"""


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(SMALL)
    return path


def run(cfg_path, out, *args):
    return main([args[0], "--config", str(cfg_path), "--out", str(out), *args[1:]])


def test_simulate_then_reconstruct(cfg_path, tmp_path, capsys):
    out = tmp_path / "o"
    assert run(cfg_path, out, "simulate", "--set", "pattern.repetitions=2") == 0
    ev = read_event_csv(out / "events.csv")
    trig = read_trigger_csv(out / "triggers.csv")
    assert ev.shape[0] > 0 and trig.shape[0] == 6
    assert read_ppm(out / "albedo.ppm").shape == (60, 80, 3)
    assert "events=" in capsys.readouterr().out
    assert run(cfg_path, out, "reconstruct") == 0
    frames = sorted(out.glob("frame_*.ppm"))
    assert [f.name for f in frames] == ["frame_0000.ppm", "frame_0001.ppm"]
    assert read_ppm(frames[0]).shape == (60, 80, 3)


def test_black_pattern_gives_empty_event_file(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert run(cfg_path, out, "simulate", "--set", "pattern.family=black") == 0
    assert (out / "events.csv").read_bytes() == b""
    assert read_trigger_csv(out / "triggers.csv").shape[0] == 3


def test_calibrate_wb_writes_gains(cfg_path, tmp_path, capsys):
    out = tmp_path / "o"
    run(cfg_path, out, "simulate", "--set", "scene.texture=gray")
    capsys.readouterr()
    assert run(cfg_path, out, "calibrate-wb") == 0
    gains = [float(v) for v in capsys.readouterr().out.strip().split(",")]
    assert gains[1] == 1.0 and all(g > 0 for g in gains)
    text = (out / "wb.cfg").read_text()
    assert text.startswith("color.gain_r = ")


def test_metrics_prints_row(cfg_path, tmp_path, capsys):
    img = np.random.default_rng(0).integers(0, 256, (8, 8, 3), dtype=np.uint8)
    write_ppm(img, tmp_path / "a.ppm")
    write_ppm(img, tmp_path / "b.ppm")
    assert run(cfg_path, tmp_path, "metrics", str(tmp_path / "a.ppm"), str(tmp_path / "b.ppm"), "--header") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["rmse_r,rmse_g,rmse_b,rmse,psnr_db,hc", "0.000000,0.000000,0.000000,0.000000,inf,1.000000"]


def test_depth_writes_cloud(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert run(cfg_path, out, "depth", "--set", "scene.texture=gray") == 0
    text = (out / "cloud.ply").read_text()
    n = int(text.split("element vertex ")[1].split()[0])
    assert n > 10
    z = np.array([float(ln.split()[2]) for ln in text.split("end_header\n")[1].splitlines()])
    assert np.median(np.abs(z - 1.6)) < 0.05


def test_patterns_and_asl(cfg_path, tmp_path, capsys):
    out = tmp_path / "o"
    assert run(cfg_path, out, "patterns", "--set", "pattern.family=dots") == 0
    pbm = read_pbm(out / "pattern_000.pbm")
    assert pbm.shape == (1140, 912) and 0 < pbm.mean() < 0.05
    assert run(cfg_path, out, "asl-run", "--set", "asl.cycles=20") == 0
    lines = (out / "decisions.csv").read_text().splitlines()
    assert lines[0] == "time_us,rung,cp,r_sl,r_m,utilization,flag" and len(lines) == 21


def test_sweep_command(cfg_path, tmp_path):
    out = tmp_path / "o"
    sets = ["--set", "sweep.cps=1.0", "--set", "sweep.windows_ms=2.5", "--set", "sweep.frames=2", "--set", "sweep.gt_window_ms=5"]
    assert run(cfg_path, out, "sweep", *sets) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("1,")


@pytest.mark.parametrize(
    "args",
    [
        ["reconstruct"],
        ["simulate", "--set", "camera.nope=1"],
        ["simulate", "--set", "camera.width"],
        ["metrics", "missing.ppm", "missing.ppm"],
    ],
)
def test_errors_exit_nonzero(cfg_path, tmp_path, capsys, args):
    assert run(cfg_path, tmp_path / "empty", *args) == 1
    assert capsys.readouterr().err.startswith("error: ")


def test_console_entry_point(cfg_path, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "eventrgbd", "patterns", "--config", str(cfg_path), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("0,solid,1.000000")
