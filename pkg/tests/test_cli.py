import json

import numpy as np
import pytest

from dynpat import cli
from dynpat.io import read_volume, write_volume

TINY = {
    "grid": {"nx": 16, "ny": 16, "n_tau": 64, "damping_width": 0},
    "n_sensors": 8,
    "n_frames": 3,
    "phantom": {"tracks": [{"center_start": [6, 7], "center_end": [8, 8], "axes_start": [3, 1.5],
                            "axes_end": [3, 1.8], "amplitude": 0.9}]},
    "sigma": 1e-3,
    "schedule": {"kind": "rsp", "sub_factor": 2},
    "seed": 3,
    "operator": {"explicit": False},
    "recon": {"recipe": "tvtvl2", "iters": 2, "alternations": 1},
}


def write_cfg(tmp_path, **changes):
    cfg = json.loads(json.dumps(TINY))
    cfg.update(changes)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_simulate(tmp_path):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--config", write_cfg(tmp_path), "--out", str(out)]) == 0
    truth, _ = read_volume(str(out / "phantom"))
    full, _ = read_volume(str(out / "data_full"))
    sub, _ = read_volume(str(out / "data_sub"))
    assert truth.shape == (3, 16, 16)
    assert full.shape == (3, 8, 64) and sub.shape == (3, 4, 64)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3 and "schedule.json" in manifest["files"]


def test_simulate_noiseless(tmp_path):
    out = tmp_path / "sim0"
    assert cli.main(["simulate", "--config", write_cfg(tmp_path, sigma=0.0), "--out", str(out)]) == 0
    truth, _ = read_volume(str(out / "phantom"))
    full, _ = read_volume(str(out / "data_full"))
    from dynpat.grid import Grid2D
    from dynpat.wave import WaveOperator
    op = WaveOperator(Grid2D(**TINY["grid"]), n_sensors=8)
    assert np.array_equal(full, op.forward(truth))


def test_seed_flag_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = write_cfg(tmp_path)
    cli.main(["simulate", "--config", cfg, "--out", str(a), "--seed", "5"])
    cli.main(["simulate", "--config", cfg, "--out", str(b), "--seed", "5"])
    assert (a / "data_sub.bin").read_bytes() == (b / "data_sub.bin").read_bytes()
    assert json.loads((a / "manifest.json").read_text())["config"]["seed"] == 5


def test_config_errors(tmp_path, capsys):
    cfg = json.loads(json.dumps(TINY))
    del cfg["sigma"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "sigma" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2
    bad = write_cfg(tmp_path, schedule={"kind": "rsp", "sub_factor": 3})
    assert cli.main(["simulate", "--config", bad, "--out", str(tmp_path / "x")]) == 2
    bad = write_cfg(tmp_path, grid={"nx": 16, "ny": 16, "dx": 1e-5, "n_tau": 64})
    assert cli.main(["simulate", "--config", bad]) == 2


def test_reconstruct_and_render(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "rec"
    assert cli.main(["reconstruct", "--config", cfg, "--out", str(out), "--backend-v", "admm"]) == 0
    p, _ = read_volume(str(out / "p"))
    v, meta = read_volume(str(out / "v"))
    assert p.shape == (3, 16, 16) and v.shape == (3, 2, 16, 16)
    assert meta["units"] == "pixels/frame"
    assert len(list((out / "frames").glob("p_*.png"))) == 3
    assert (out / "trace.csv").read_text().startswith("seconds,label,energy")
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["info"]["backend_v"] == "admm"
    assert np.all(np.diff(metrics["energies"]) <= 0)
    ren = tmp_path / "ren"
    assert cli.main(["render", "--input", str(out / "v"), "--out", str(ren),
                     "--translation-correct"]) == 0
    assert len(list(ren.glob("flow_*.png"))) == 3
    assert cli.main(["render", "--input", str(tmp_path / "missing"), "--out", str(ren)]) == 2


def test_bench(tmp_path):
    rng = np.random.default_rng(0)
    yy, xx = np.mgrid[0:16, 0:16]
    p = np.stack([np.exp(-((xx - 7 - t) ** 2 + (yy - 8) ** 2) / 8.0) for t in range(3)])
    write_volume(str(tmp_path / "img"), p + 0.01 * rng.random(p.shape))
    out = tmp_path / "bench"
    rc = cli.main(["bench-solvers", "--config", write_cfg(tmp_path), "--input", str(tmp_path / "img"),
                   "--out", str(out)])
    assert rc == 0
    lines = (out / "bench.csv").read_text().splitlines()
    assert lines[0] == "solver,preconditioner,iteration,relative_residual,seconds"
    summary = json.loads((out / "bench_summary.json").read_text())
    assert set(summary) == {f"{s}+{pc}" for s in ("cg", "minres") for pc in ("none", "jacobi", "ic0")}
    assert summary["cg+ic0"] <= summary["cg+none"]


def test_solver_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise cli.SolverError("diverged")
    monkeypatch.setattr(cli, "run_recipe", boom)
    assert cli.main(["reconstruct", "--config", write_cfg(tmp_path), "--out", str(tmp_path)]) == 3
    assert "solver failure" in capsys.readouterr().err
