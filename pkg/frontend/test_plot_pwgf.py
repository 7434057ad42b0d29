import math
import os
import subprocess
import sys

import pytest

SCRIPT = os.path.join(os.path.dirname(__file__), "plot_pwgf.py")


def run_script(*args):
    return subprocess.run([sys.executable, SCRIPT, *args], capture_output=True, text=True)


def write_trace(path, n_rows, scale=1.0, decay=0.01):
    lines = ["iter,f_value,grad_norm,event,elapsed_ms"]
    for k in range(n_rows):
        f = scale * math.exp(-decay * k)
        g = scale * 0.5 * math.exp(-decay * 0.7 * k)
        lines.append(f"{k},{f!r},{g!r},none,{0.1 * k:.3f}")
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def trace_dir(tmp_path):
    out = tmp_path / "traces"
    out.mkdir()
    for m, mode in enumerate(("static", "isotropic", "hessian")):
        for seed in range(5):
            # vary lengths so per-mode truncation is exercised
            write_trace(out / f"demo_{mode}_seed{seed}.csv", 200 - 10 * seed,
                        scale=1.0 + 0.1 * seed, decay=0.005 * (m + 1))
    return out


def test_three_modes_five_seeds(trace_dir, tmp_path):
    for metric in ("loss", "gradnorm"):
        out = tmp_path / f"{metric}.png"
        proc = run_script("--glob", str(trace_dir / "*.csv"), "--out", str(out),
                          "--metric", metric)
        assert proc.returncode == 0, proc.stderr
        assert out.stat().st_size > 0
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_byte_identical_reruns(trace_dir, tmp_path):
    blobs = []
    for name in ("a.png", "b.png"):
        out = tmp_path / name
        proc = run_script("--glob", str(trace_dir / "*.csv"), "--out", str(out), "--logy")
        assert proc.returncode == 0, proc.stderr
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]


def test_single_file_zero_width_band(tmp_path):
    write_trace(tmp_path / "solo_static_seed0.csv", 50)
    out = tmp_path / "one.png"
    proc = run_script("--glob", str(tmp_path / "*.csv"), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    assert out.stat().st_size > 0


def test_empty_glob_exits_2(tmp_path):
    proc = run_script("--glob", str(tmp_path / "nothing*.csv"), "--out", str(tmp_path / "x.png"))
    assert proc.returncode == 2
    assert "no files match" in proc.stderr


def test_schema_mismatch_exits_1_naming_file(tmp_path):
    bad = tmp_path / "demo_static_seed0.csv"
    bad.write_text("iteration,loss\n0,1.0\n")
    proc = run_script("--glob", str(tmp_path / "*.csv"), "--out", str(tmp_path / "x.png"))
    assert proc.returncode == 1
    assert "demo_static_seed0.csv" in proc.stderr


def test_bad_filename_pattern_exits_1(tmp_path):
    write_trace(tmp_path / "notpattern.csv", 10)
    proc = run_script("--glob", str(tmp_path / "*.csv"), "--out", str(tmp_path / "x.png"))
    assert proc.returncode == 1
    assert "notpattern.csv" in proc.stderr
