"""Command-line front end: ``dynpat {simulate,reconstruct,render,bench-solvers}``.

Experiments are described by a JSON config (see :data:`DEFAULT_CONFIG`);
command-line flags override the matching config entries. Exit codes: 0 on
success, 2 for configuration errors, 3 for solver failures.
"""

import argparse
import copy
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .admm import flow_config, flow_system_matrix
from .diffops import e_matrix
from .grid import DataSeq, Grid2D, RegParams
from .io import read_volume, save_frames_png, save_rgb_png, write_volume
from .linsolve import SolverError, SparseSpdSystem
from .phantom import default_tracks, make_dynamic_phantom, simulate_data, tracks_from_json
from .recon import RECIPES, run_recipe
from .sampling import SamplingSchedule, make_rsp_schedule
from .viz import render_flow_colorwheel, translation_correct
from .wave import WaveOperator, explicit_operator

log = logging.getLogger("dynpat")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

DEFAULT_CONFIG = {
    "grid": Grid2D().to_dict(),
    "n_sensors": 100,
    "n_frames": 25,
    "phantom": "default",
    "sigma": 5e-3,
    "schedule": {"kind": "rsp", "sub_factor": 25},
    "seed": 0,
    "operator": {"explicit": True, "cache_dir": None},
    "recon": {
        "recipe": "tvtvl2",
        "alpha": 3.2e-4,
        "beta": 3.2e-4,
        "gamma": 0.1,
        "iters": None,
        "alternations": 4,
        "data": "sub",
        "data_dir": None,
    },
    "backend_p": "pdhg",
    "backend_v": "pdhg",
    "precond": "ic0",
    "solver": "cg",
    "bench": {"tol": 1e-6, "max_iters": 5000, "beta": 3.2e-4, "gamma": 0.1, "rho": 0.1},
}

_REQUIRED = ("grid", "n_frames", "sigma", "schedule", "seed")


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], val)
        else:
            out[k] = val
    return out


def load_config(path=None, args=None):
    """Read a JSON config, fill defaults, apply flag overrides and validate."""
    user = {}
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        missing = [k for k in _REQUIRED if k not in user]
        if missing:
            raise ConfigError(f"config {path} is missing field(s): {', '.join(missing)}")
    cfg = _merge(DEFAULT_CONFIG, user)
    if args is not None:
        for key in ("seed", "backend_p", "backend_v", "precond", "solver"):
            val = getattr(args, key, None)
            if val is not None:
                cfg[key] = val
    _validate(cfg)
    return cfg


def _validate(cfg):
    try:
        cfg["_grid"] = Grid2D(**cfg["grid"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc
    if int(cfg["n_frames"]) < 1:
        raise ConfigError("n_frames must be >= 1")
    if not float(cfg["sigma"]) >= 0:
        raise ConfigError("sigma must be nonnegative")
    kind = cfg["schedule"].get("kind")
    if kind not in ("rsp", "full"):
        raise ConfigError(f"schedule kind must be 'rsp' or 'full', got {kind!r}")
    for key in ("backend_p", "backend_v"):
        if cfg[key] not in ("pdhg", "admm"):
            raise ConfigError(f"{key} must be 'pdhg' or 'admm'")
    if cfg["precond"] not in ("none", "jacobi", "ic0"):
        raise ConfigError("precond must be one of none, jacobi, ic0")
    if cfg["solver"] not in ("cg", "minres"):
        raise ConfigError("solver must be 'cg' or 'minres'")
    if cfg["recon"]["recipe"] not in RECIPES:
        raise ConfigError(f"recipe must be one of {RECIPES}")


def _public(cfg):
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def _tracks(cfg):
    ph = cfg["phantom"]
    if ph == "default":
        return default_tracks()
    try:
        if isinstance(ph, str):
            with open(ph) as fh:
                return tracks_from_json(fh.read())
        return tracks_from_json(json.dumps(ph))
    except (OSError, TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid phantom tracks: {exc}") from exc


def _schedule(cfg):
    s = cfg["schedule"]
    n = int(cfg["n_sensors"])
    if s["kind"] == "full":
        return SamplingSchedule.full(n)
    try:
        return make_rsp_schedule(n, int(s["sub_factor"]), seed=int(cfg["seed"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid schedule: {exc}") from exc


def _operator(cfg, threads):
    base = WaveOperator(cfg["_grid"], n_sensors=int(cfg["n_sensors"]), workers=threads)
    op_cfg = cfg["operator"]
    if op_cfg.get("explicit", True):
        return explicit_operator(base, cache_dir=op_cfg.get("cache_dir"))
    return base


def _simulate(cfg, threads):
    grid = cfg["_grid"]
    tracks = _tracks(cfg)
    try:
        truth = make_dynamic_phantom(grid, tracks, int(cfg["n_frames"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sched = _schedule(cfg)
    fwd = _operator(cfg, threads)
    full, sub, snr = simulate_data(truth, fwd, sched, float(cfg["sigma"]), seed=int(cfg["seed"]))
    return truth, full, sub, snr, sched, fwd


def _write_manifest(out, cfg, command, files, extra=None):
    doc = {"command": command, "version": __version__, "config": _public(cfg),
           "files": sorted(files), "created_unix": time.time()}
    doc.update(extra or {})
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(doc, fh, indent=2, default=str)


def cmd_simulate(cfg, out, threads=None):
    """Write phantom, full and sub-sampled data, schedule and manifest to ``out``."""
    os.makedirs(out, exist_ok=True)
    truth, full, sub, snr, sched, _ = _simulate(cfg, threads)
    prov = {"seed": cfg["seed"], "sigma": cfg["sigma"]}
    files = []
    files += write_volume(os.path.join(out, "phantom"), truth, "a.u.", prov)
    files += write_volume(os.path.join(out, "data_full"), full.blocks, "a.u.", prov)
    files += write_volume(os.path.join(out, "data_sub"), sub.blocks, "a.u.", prov)
    sched_path = os.path.join(out, "schedule.json")
    with open(sched_path, "w") as fh:
        fh.write(sched.to_json())
    files.append(sched_path)
    _write_manifest(out, cfg, "simulate", [os.path.basename(f) for f in files],
                    {"snr_db": snr, "shapes": {"phantom": list(truth.shape),
                                               "data_full": list(full.blocks.shape),
                                               "data_sub": list(sub.blocks.shape)}})
    log.info("simulated %d frames, mean SNR %.2f dB", len(truth), snr)
    return {"snr_db": snr}


def _load_simulation(cfg, threads):
    data_dir = cfg["recon"].get("data_dir")
    if not data_dir:
        truth, full, sub, _, sched, fwd = _simulate(cfg, threads)
        return truth, full, sub, sched, fwd
    try:
        truth, _ = read_volume(os.path.join(data_dir, "phantom"))
        full, _ = read_volume(os.path.join(data_dir, "data_full"))
        sub, _ = read_volume(os.path.join(data_dir, "data_sub"))
        with open(os.path.join(data_dir, "schedule.json")) as fh:
            sched = SamplingSchedule.from_json(fh.read())
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load simulation from {data_dir}: {exc}") from exc
    sigma = float(cfg["sigma"])
    return truth, DataSeq(full, sigma), DataSeq(sub, sigma), sched, _operator(cfg, threads)


def cmd_reconstruct(cfg, out, threads=None):
    """Run the configured recipe; write volumes, PNG frames, trace CSV and metrics."""
    os.makedirs(out, exist_ok=True)
    rc = cfg["recon"]
    truth, full, sub, sched, fwd = _load_simulation(cfg, threads)
    if rc.get("data", "sub") == "full":
        data, sched = full, SamplingSchedule.full(fwd.n_sensors)
    else:
        data = sub
    params = RegParams(float(rc["alpha"]), float(rc["beta"]), float(rc["gamma"]))
    res = run_recipe(rc["recipe"], data, sched, fwd, params=params, backend_p=cfg["backend_p"],
                     backend_v=cfg["backend_v"], iters=rc.get("iters"), truth=truth,
                     alternations=int(rc.get("alternations", 4)), seed=int(cfg["seed"]),
                     v_config=flow_config(preconditioner=cfg["precond"], solver=cfg["solver"])
                     if cfg["backend_v"] == "admm" else None)
    files = list(write_volume(os.path.join(out, "p"), res.p, "a.u.", {"recipe": res.recipe}))
    if res.v is not None:
        files += write_volume(os.path.join(out, "v"), res.v, "pixels/frame",
                              {"recipe": res.recipe})
    vmax = float(truth.max()) if truth is not None and truth.max() > 0 else float(res.p.max())
    files += save_frames_png(res.p, os.path.join(out, "frames"), "p", 0.0, vmax)
    trace_path = os.path.join(out, "trace.csv")
    res.trace.to_csv(trace_path)
    files.append(trace_path)
    metrics = {"recipe": res.recipe, "params": vars(res.params), "info": res.info,
               "metrics": res.metrics, "energies": res.energies}
    metrics_path = os.path.join(out, "metrics.json")
    with open(metrics_path, "w") as fh:
        json.dump(metrics, fh, indent=2)
    files.append(metrics_path)
    _write_manifest(out, cfg, "reconstruct", [os.path.relpath(f, out) for f in files])
    return metrics


def cmd_render(v_path, out, correct=False, border=4):
    """Color-wheel PNG per frame of a stored motion volume."""
    try:
        v, _ = read_volume(v_path)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read motion volume {v_path}: {exc}") from exc
    if v.ndim != 4 or v.shape[1] < 2:
        raise ConfigError(f"motion volume must be (T, 2, ny, nx), got {v.shape}")
    if correct:
        v = translation_correct(v[:, :2])
    os.makedirs(out, exist_ok=True)
    return [save_rgb_png(render_flow_colorwheel(v[t, :2], border),
                         os.path.join(out, f"flow_{t:03d}.png")) for t in range(len(v))]


def bench_solvers(p, beta, gamma, rho, frame=None, tol=1e-6, max_iters=5000,
                  solvers=("cg", "minres"), preconditioners=("none", "jacobi", "ic0"),
                  shift=0.0):
    """Solve the motion-update system of one frame with every solver/preconditioner pair.

    The right-hand side is the one of the first ADMM iteration from zero
    motion and dual variables, ``-gamma E^T (p_{t+1} - p_t)``. Returns rows
    ``(solver, preconditioner, iteration, relative_residual, seconds)``.
    """
    p = np.asarray(p, dtype=float)
    t = (len(p) - 2) // 2 if frame is None else frame
    A = flow_system_matrix(p[t], gamma, rho, shift)
    rhs = -gamma * (e_matrix(p[t]).T @ (p[t + 1] - p[t]).ravel())
    rows = []
    for solver in solvers:
        for pc in preconditioners:
            system = SparseSpdSystem(A, preconditioner=pc, solver=solver)
            _, info = system.solve(rhs, tol=tol, max_iters=max_iters)
            for k, (r, s) in enumerate(zip(info.residuals, info.times)):
                rows.append((solver, pc, k, r, s))
    return rows


def write_bench_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("solver,preconditioner,iteration,relative_residual,seconds\n")
        for solver, pc, k, r, s in rows:
            fh.write(f"{solver},{pc},{k},{r:.6e},{s:.6f}\n")
    return path


def summarize_bench(rows, tol):
    """Iterations to reach ``tol`` per (solver, preconditioner); ``None`` if never."""
    out = {}
    for solver, pc, k, r, _ in rows:
        key = (solver, pc)
        out.setdefault(key, None)
        if r <= tol and out[key] is None:
            out[key] = k
    return out


def cmd_bench(cfg, out, input_path=None, threads=None):
    """Solver benchmark on the motion-update system of a reconstruction (or the phantom)."""
    os.makedirs(out, exist_ok=True)
    b = cfg["bench"]
    if input_path:
        try:
            p, _ = read_volume(input_path)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read image volume {input_path}: {exc}") from exc
    else:
        p = make_dynamic_phantom(cfg["_grid"], _tracks(cfg), int(cfg["n_frames"]))
    if p.ndim != 3 or len(p) < 2:
        raise ConfigError("bench needs an image sequence with at least two frames")
    rows = bench_solvers(p, float(b["beta"]), float(b["gamma"]), float(b["rho"]),
                         tol=float(b["tol"]), max_iters=int(b["max_iters"]))
    path = write_bench_csv(rows, os.path.join(out, "bench.csv"))
    summary = {f"{s}+{pc}": k for (s, pc), k in summarize_bench(rows, float(b["tol"])).items()}
    with open(os.path.join(out, "bench_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    _write_manifest(out, cfg, "bench-solvers", [os.path.basename(path), "bench_summary.json"])
    return summary


def build_parser():
    ap = argparse.ArgumentParser(prog="dynpat", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment configuration")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, default=os.cpu_count(),
                       help="FFT worker threads (default: logical cores)")
        p.add_argument("--backend-p", dest="backend_p", choices=("pdhg", "admm"))
        p.add_argument("--backend-v", dest="backend_v", choices=("pdhg", "admm"))
        p.add_argument("--precond", choices=("none", "jacobi", "ic0"))
        p.add_argument("--solver", choices=("cg", "minres"))
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("simulate", help="generate phantom and data"))
    common(sub.add_parser("reconstruct", help="run a reconstruction recipe"))
    r = sub.add_parser("render", help="color-code a motion volume")
    common(r)
    r.add_argument("--input", required=True, help="motion volume path without extension")
    r.add_argument("--translation-correct", action="store_true")
    b = sub.add_parser("bench-solvers", help="compare Krylov solvers and preconditioners")
    common(b)
    b.add_argument("--input", help="image volume path without extension")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args)
        if args.command == "simulate":
            res = cmd_simulate(cfg, args.out, args.threads)
        elif args.command == "reconstruct":
            res = cmd_reconstruct(cfg, args.out, args.threads)
            res = {"mean_rel_l2": (res["metrics"] or {}).get("mean_rel_l2")}
        elif args.command == "render":
            res = {"files": len(cmd_render(args.input, args.out, args.translation_correct))}
        else:
            res = cmd_bench(cfg, args.out, args.input, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(json.dumps(res, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
