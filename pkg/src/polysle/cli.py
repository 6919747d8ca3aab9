"""Command-line front end: ``polysle {simulate,trace,map,evolve,verify}``.

Exit codes: 0 success or pass, 1 fail, 2 inconclusive, 3 config or usage
error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as C
from . import io
from . import verify as V
from ._accel import backend
from .driving import CollisionError, driven_path, simulate_driver
from .geometry import ConfigError, validate_config
from .loewner import compute_trace
from .scmap import QuadratureError, polygon_snapshot

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3, 4
TESTS = ("martingale", "qv", "hitting-formula", "hitting-mc", "theorem-rate",
         "metric-equivalence", "sc-oracles")
_STATUS_CODE = {V.PASS: EXIT_OK, V.FAIL: EXIT_FAIL, V.INCONCLUSIVE: EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


def build_path(full: dict):
    cfg = C.prevertex_config(full)
    sol = full["solver"]
    T, dt = sol["T"], sol["dt"]
    if sol["driver"] == "sde":
        return simulate_driver(cfg, T, dt, full["seed"], sol.get("eps_coll"), order=sol["order"])
    steps = int(round(T / dt))
    W = sol["drift"] * dt * np.arange(steps + 1) if sol["driver"] == "linear" else np.zeros(steps + 1)
    return driven_path(cfg, W, dt, order=sol["order"])


def manifest(full: dict, command: str, **extra) -> dict:
    return {"command": command, "version": __version__, "config_hash": V.config_hash(full),
            "seed": full["seed"], "config": full, **extra}


def _grid_time(path, t: float) -> float:
    i = int(np.argmin(np.abs(path.t - t)))
    if abs(path.t[i] - t) > 0.5 * path.dt:
        raise UsageError(f"time {t} is beyond the path end {path.t[-1]:.6g}")
    return float(path.t[i])


def _check_before_sigma(path, t: float):
    if path.sigma is not None and t >= path.sigma:
        raise UsageError(f"time {t} is at or past the collision time {path.sigma:.6g}")


def cmd_simulate(full: dict, out: Path) -> int:
    path = build_path(full)
    io.write_path_csv(path, out / "path.csv")
    io.write_path_binary(path, out / "path.bin")
    io.write_json(manifest(full, "simulate", sigma=path.sigma, steps=path.m - 1,
                          eps_coll=path.eps_coll), out / "manifest.json")
    return EXIT_OK


def cmd_trace(full: dict, out: Path) -> int:
    path = build_path(full)
    tr = compute_trace(path, full["trace"]["stride"])
    io.write_trace_csv(tr, out / "trace.csv")
    (out / "trace.svg").write_text(io.trace_svg(tr, full["trace"]["size"]), encoding="utf-8")
    io.write_json(manifest(full, "trace", sigma=path.sigma, points=len(tr.times)),
                  out / "manifest.json")
    return EXIT_OK


def _snapshot(path, t, out: Path, stem: str, size: int) -> dict:
    t = _grid_time(path, t)
    _check_before_sigma(path, t)
    snap = polygon_snapshot(path, t)
    d = io.snapshot_dict(snap)
    io.write_json(d, out / f"{stem}.json")
    (out / f"{stem}.svg").write_text(io.snapshot_svg(snap, size), encoding="utf-8")
    return d


def cmd_map(full: dict, out: Path) -> int:
    path = build_path(full)
    _snapshot(path, full["map"]["t"], out, "snapshot", full["map"]["size"])
    io.write_json(manifest(full, "map", sigma=path.sigma), out / "manifest.json")
    return EXIT_OK


def cmd_evolve(full: dict, out: Path) -> int:
    path = build_path(full)
    frames = full["evolve"]["frames"]
    for t in frames:
        _check_before_sigma(path, t)
    names = []
    for j, t in enumerate(frames):
        stem = f"frame_{j:04d}"
        _snapshot(path, t, out, stem, full["evolve"]["size"])
        names.append(stem)
    io.write_json(manifest(full, "evolve", sigma=path.sigma, frames=frames, files=names),
                  out / "manifest.json")
    return EXIT_OK


def run_test(name: str, full: dict, threads: int) -> V.Report:
    cfg = C.prevertex_config(full)
    v, sol, seed = full["verify"], full["solver"], full["seed"]
    T = v.get("T", sol["T"])
    dt = v.get("dt", sol["dt"])
    if name == "martingale":
        return V.martingale_test(cfg, T, dt, v["N"], seed, max_attrition=v["max_attrition"],
                                 eps_coll=sol.get("eps_coll"), threads=threads)
    if name == "qv":
        return V.qv_ensemble(cfg, T, dt, v["paths"], seed, v["n_intervals"])
    if name == "hitting-formula":
        return V.hitting_formula_report(cfg.kappa, v["x"], v["y"])
    if name == "hitting-mc":
        rep, _ = V.hitting_probability_mc(cfg.kappa, v["x"], v["y"], v["N"], v["T_max"],
                                          v.get("dt", 1e-3), seed, v["rel_tol"],
                                          max_undecided=v["max_undecided"], threads=threads)
        return rep
    if name == "theorem-rate":
        path = build_path(full)
        pts = [complex(a, b) for a, b in v["points"]]
        return V.theorem_rate_report(path, pts, h=v.get("h"))
    if name == "metric-equivalence":
        return V.metric_equivalence_test(cfg, v.get("S"), v.get("ds"), v["N"], seed, v["t_star"],
                                         dt, v["drift_sign"], max_attrition=v["max_attrition"],
                                         threads=threads)
    if name == "sc-oracles":
        return V.sc_oracles(cfg=cfg)
    raise UsageError(f"unknown test {name!r}; choose from {', '.join(TESTS)}")


def cmd_verify(full: dict, out: Path, test: str | None, threads: int) -> int:
    name = test or full["verify"].get("test")
    if name is None:
        raise UsageError("no test given (use --test or verify.test)")
    rep = run_test(name, full, threads)
    doc = rep.to_dict()
    doc["config_hash"] = V.config_hash(full)
    io.write_json(doc, out / "report.json")
    print(V.report_table([rep]))
    return _STATUS_CODE[rep.status]


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polysle", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "trace", "map", "evolve", "verify"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--out", type=Path, default=Path("."))
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int)
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "evolve":
            s.add_argument("--frames", help="comma-separated frame times")
        if name == "verify":
            s.add_argument("--test", choices=TESTS)
    return p


def main(argv=None) -> int:
    p = parser()
    try:
        args = p.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    try:
        doc = C.json.loads(args.config.read_text(encoding="utf-8"))
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.threads is not None:
            doc.setdefault("solver", {})["threads"] = args.threads
        if getattr(args, "frames", None):
            frames = [float(x) for x in args.frames.split(",") if x.strip()]
            doc.setdefault("evolve", {})["frames"] = frames
        full = C.parse(doc)
        rep = validate_config(C.prevertex_config(full))
        if args.verbose:
            for w in rep.warnings:
                print(f"warning: {w}", file=sys.stderr)
            print(f"backend: {backend()}", file=sys.stderr)
        args.out.mkdir(parents=True, exist_ok=True)
        threads = full["solver"]["threads"]
        if args.command == "simulate":
            return cmd_simulate(full, args.out)
        if args.command == "trace":
            return cmd_trace(full, args.out)
        if args.command == "map":
            return cmd_map(full, args.out)
        if args.command == "evolve":
            return cmd_evolve(full, args.out)
        return cmd_verify(full, args.out, args.test, threads)
    except (ConfigError, UsageError, OSError, C.json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (CollisionError, QuadratureError, ValueError, ArithmeticError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC

if __name__ == "__main__":
    sys.exit(main())
