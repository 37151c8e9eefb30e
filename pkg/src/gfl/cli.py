"""Command-line front end.

Every run validates its configuration first, writes its artifacts to the
output directory and finishes with ``manifest.toml``; feeding that manifest
back through ``--config`` reproduces the artifacts bit for bit.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 a
verification check failed.
"""

from __future__ import annotations

import argparse
import os
import platform
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .bands import band_bound_report, default_band_plan
from .config import DEFAULT_SPECS, RunConfig, load_config
from .engine import Grid, assemble_covariance, sample
from .errors import NumericalError, SpecError
from .geometry import build_dyadic_cubes
from .multipoint import (
    multipoint_report,
    phase_table,
    smallball_estimate,
    write_phase_csv,
    write_smallball_csv,
)
from .verifier import check_a2, check_increment_bound, check_nondegeneracy, write_jsonl

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
SUBCOMMANDS = ("spec", "sample", "verify", "bands", "multipoint", "smallball", "dyadic")


def _grid(spec, size) -> Grid:
    return Grid.uniform(spec, size if isinstance(size, list) else int(size))


def run_spec(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    spec = cfg.field_spec()
    ex = spec.exponents
    e = cfg.experiment
    ms = e["m"] if isinstance(e["m"], list) else [e["m"]]
    ds = e["d"] if isinstance(e["d"], list) else [e["d"]]
    rows = phase_table(spec, ms, ds)
    print(f"family: {spec.family.value}")
    print("gamma: " + ", ".join(str(g) for g in ex.gamma))
    print("alpha: " + ", ".join(str(a) for a in ex.alpha))
    print("delta: " + ", ".join(str(a) for a in ex.delta))
    print(f"Q={ex.Q}")
    for p in rows:
        print(f"m={p.m} d={p.d} Q={p.Q} margin {p.margin} {p.label}")
    write_phase_csv(rows, out / "phase.csv")
    return ["phase.csv"], EXIT_OK


def run_sample(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    spec = cfg.field_spec()
    grid = _grid(spec, cfg.experiment["grid"])
    cov = assemble_covariance(spec, grid)
    fs = sample(cov, spec.d, int(cfg.experiment["replicates"]), cfg.seed, threads=cfg.threads)
    fs.save(out / "sample.bin")
    files = ["sample.bin"]
    if fs.values.size <= 100_000:
        fs.to_csv(out / "sample.csv", grid)
        files.append("sample.csv")
    print(f"sampled {fs.R} x {fs.d} x {fs.n} values, jitter {cov.jitter:.3g}")
    return files, EXIT_OK


def run_verify(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    spec = cfg.field_spec()
    e = cfg.experiment
    checks = e["checks"] if isinstance(e["checks"], list) else [e["checks"]]
    reports = []
    for name in checks:
        if name == "a2":
            for case in ("i", "ii"):
                reports.append(check_a2(spec, rho=float(e["rho"]), pairs=int(e["pairs"]), seed=cfg.seed, case=case))
        elif name == "increment":
            reports.append(check_increment_bound(spec, pairs=max(50, int(e["pairs"]) // 10), seed=cfg.seed))
        elif name == "nondegeneracy":
            rng = np.random.default_rng(cfg.seed)
            pts = spec.lower + (spec.upper - spec.lower) * rng.random((3, spec.dim))
            reports.append(check_nondegeneracy(spec, pts))
        else:
            raise SpecError(f"unknown check {name!r}")
    write_jsonl(reports, out / "verify.jsonl")
    failed = [r for r in reports if not getattr(r, "passed", not getattr(r, "violated", False))]
    for r in reports:
        print(r.to_json())
    return ["verify.jsonl"], EXIT_CHECK if failed else EXIT_OK


def run_bands(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    spec = cfg.field_spec()
    e = cfg.experiment
    bands = default_band_plan(int(e["a_max"]), float(e["b_max"]))
    rep = band_bound_report(spec, bands, int(e["pairs_per_band"]), seed=cfg.seed)
    rep.to_csv(out / "bands.csv")
    print(f"fitted c0 = {rep.fitted_c0:.6g} over {len(rep.rows)} pairs")
    return ["bands.csv"], EXIT_OK


def run_multipoint(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    spec = cfg.field_spec()
    e = cfg.experiment
    grid = _grid(spec, e["grid"])
    cov = assemble_covariance(spec, grid)
    fs = sample(cov, spec.d, int(e["replicates"]), cfg.seed, threads=cfg.threads)
    mt = int(e["max_tuples"]) or None
    rep = multipoint_report(spec, fs, grid, int(e["m"]), float(e["separation"]), e["eps"], mt, cfg.seed)
    rep.to_csv(out / "multipoint.csv")
    print(f"{rep.n_tuples} separated tuples{' (subsampled)' if rep.subsampled else ''}, "
          f"fitted exponent {rep.exponent:.4g}, expected {(rep.m - 1) * spec.d}; {rep.phase.label}")
    return ["multipoint.csv"], EXIT_OK


def run_smallball(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    spec = cfg.field_spec()
    e = cfg.experiment
    center = e["center"] or list(spec.lower)
    rows = []
    for r in e["r"]:
        us = [float(r) * f for f in e["u_over_r"]]
        rows += smallball_estimate(
            spec, center, float(r), us, int(e["replicates"]), cfg.seed,
            per_axis=int(e["per_axis"]) or None, threads=cfg.threads,
        )
    write_smallball_csv(rows, out / "smallball.csv")
    print(f"{len(rows)} small-ball estimates on {rows[0].n_points} points")
    return ["smallball.csv"], EXIT_OK


def run_dyadic(cfg: RunConfig, out: Path) -> tuple[list[str], int]:
    spec = cfg.field_spec()
    tree = build_dyadic_cubes(spec.domain, spec.exponents, int(cfg.experiment["q_max"]))
    n = tree.to_csv(out / "dyadic.csv")
    print(f"{n} cubes, c1 = {tree.c1:.6g}, c2 = {tree.c2:.6g}")
    return ["dyadic.csv"], EXIT_OK


RUNNERS = {
    "spec": run_spec,
    "sample": run_sample,
    "verify": run_verify,
    "bands": run_bands,
    "multipoint": run_multipoint,
    "smallball": run_smallball,
    "dyadic": run_dyadic,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gfl", description="Anisotropic Gaussian field laboratory")
    parser.add_argument("--version", action="version", version=f"gfl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML run configuration or an emitted manifest")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--threads", type=int, help="worker cap; never changes results")
        p.add_argument("--out", help="output directory (overrides GFL_OUT and the config)")
        p.add_argument("--family", choices=sorted(DEFAULT_SPECS), help="use the default spec of a family")
        if name == "verify":
            p.add_argument("--check", action="append", help="run only this check (repeatable)")
        if name == "spec":
            p.add_argument("-m", type=int, action="append", help="multiplicity for the phase table")
            p.add_argument("-d", type=int, action="append", help="codomain dimension for the phase table")
    return parser


def _resolve(args) -> tuple[RunConfig, Path]:
    if args.config:
        cfg = load_config(args.config)
    elif args.family:
        cfg = RunConfig(dict(DEFAULT_SPECS[args.family]))
    else:
        cfg = RunConfig(dict(DEFAULT_SPECS["fbm_sheet"]))
    if args.config and args.family and cfg.spec.get("family") != args.family:
        raise SpecError("--family disagrees with the config spec")
    if args.seed is not None:
        if args.seed < 0:
            raise SpecError("seed must be non-negative")
        cfg.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise SpecError("threads must be positive")
        cfg.threads = args.threads
    if getattr(args, "check", None):
        cfg.experiment["checks"] = list(args.check)
    if getattr(args, "m", None):
        cfg.experiment["m"] = list(args.m)
    if getattr(args, "d", None):
        cfg.experiment["d"] = list(args.d)
    cfg = cfg.materialize(args.command)
    out = args.out or os.environ.get("GFL_OUT") or cfg.output.get("dir") or "gfl-out"
    return cfg, Path(out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg, out = _resolve(args)
        out.mkdir(parents=True, exist_ok=True)
        files, code = RUNNERS[args.command](cfg, out)
    except SpecError as exc:
        print(f"gfl: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"gfl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"gfl: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INVALID
    run = {
        "subcommand": args.command,
        "exit_code": code,
        "outputs": files,
        "wall_time_s": round(time.perf_counter() - t0, 6),
        "versions": {
            "gfl": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    (out / "manifest.toml").write_text(cfg.to_toml(run), encoding="utf-8")
    if code == EXIT_CHECK:
        print("gfl: one or more checks failed", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
