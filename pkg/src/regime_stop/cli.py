"""Command-line front end: validate / solve / oracle / bench.

Every CSV the commands write embeds the resolved config hash in a leading
comment line and uses a fixed significant-digit format, so reruns with the
same config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .boundary import BoundaryCurve, extract_boundary
from .chain import transition_matrix
from .config import RunConfig, load_config
from .density import triangle_rule
from .errors import ConfigError, EmptyStopSet, ModelValidationError
from .oracle import compare_policies
from .value import solve_surfaces

MASS_TOL = 1e-6
ROW_TOL = 1e-10


def _fmt(x: float, precision: int) -> str:
    return f"{x:.{precision}g}"


def _write_csv(path: Path, header: str, rows, cfg_hash: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config={cfg_hash}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _seeded(config: RunConfig, seed_override: Optional[int]) -> int:
    return int(seed_override if seed_override is not None else config["mc.seed"])


def cmd_validate(config: RunConfig, out_dir: Path) -> int:
    """Model report, quadrature normalisation and exp(Q) row-sum checks.

    Returns 0 iff every hard check passes; mass-deficit warnings do not flip
    the exit code but are printed with the measured deficit.
    """
    failures = 0
    try:
        model = config.model()
        print(f"PASS model: {model.num_states} state(s), horizon {model.horizon}")
    except ModelValidationError as exc:
        for v in exc.violations:
            print(f"FAIL model: {v}")
        return 1

    grid = config.grid(model)
    spec = config.quadrature()

    rule = triangle_rule(spec, grid.delta)
    deficit = 1.0 - rule.total_weight
    if abs(deficit) <= MASS_TOL:
        print(f"PASS quadrature: |mass - 1| = {abs(deficit):.3e} at r = {grid.delta:g}")
    else:
        print(
            f"WARN quadrature: mass deficit {deficit:.3e} at r = {grid.delta:g} "
            f"(trunc_sd = {spec.trunc_sd} too tight or too few nodes)"
        )

    tm = transition_matrix(model, grid.delta)
    row_err = float(np.abs(tm.probs.sum(axis=1) - 1.0).max())
    raw = tm.residual
    if raw <= ROW_TOL and row_err <= ROW_TOL:
        print(f"PASS transition matrix: raw row-sum residual {raw:.3e}")
    else:
        print(f"FAIL transition matrix: raw row-sum residual {raw:.3e}")
        failures += 1

    return 1 if failures else 0


def _boundary_rows(curve: BoundaryCurve, precision: int):
    for k, t in enumerate(curve.times):
        for j in range(curve.num_states):
            yield (
                _fmt(t, precision),
                str(j),
                _fmt(curve.b_raw[k, j], precision),
                _fmt(curve.b_smoothed[k, j], precision),
            )


def cmd_solve(config: RunConfig, out_dir: Path, threads: int = 1) -> int:
    """Solve both surfaces, extract the boundary, write the CSV artifacts."""
    model = config.model()
    grid = config.grid(model)
    spec = config.quadrature()
    precision = int(config["output.precision"])
    cfg_hash = config.config_hash()

    timings = {}
    t0 = time.perf_counter()
    value, stop = solve_surfaces(model, grid, spec)
    timings["solve_surfaces"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        curve = extract_boundary(
            value, stop,
            tol_abs=float(config["tolerance.tol_abs"]),
            tol_rel=float(config["tolerance.tol_rel"]),
        )
    except EmptyStopSet as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: raise grid.a_max (or leave it 'auto') and rerun", file=sys.stderr)
        return 1
    timings["extract_boundary"] = time.perf_counter() - t0

    out_dir.mkdir(parents=True, exist_ok=True)

    def surface_rows():
        for k, t in enumerate(grid.times):
            for ai, a in enumerate(grid.a_nodes):
                for j in range(model.num_states):
                    yield (
                        _fmt(t, precision),
                        _fmt(a, precision),
                        str(j),
                        _fmt(value.values[k, ai, j], precision),
                        _fmt(stop.values[k, ai, j], precision),
                    )

    _write_csv(out_dir / "surface.csv", "t,a,state,V,G", surface_rows(), cfg_hash)
    _write_csv(
        out_dir / "boundary.csv",
        "t,state,b_raw,b_smoothed",
        _boundary_rows(curve, precision),
        cfg_hash,
    )

    meta = {
        "command": "solve",
        "config": config.entries,
        "config_hash": cfg_hash,
        "defaults_applied": config.defaults_applied,
        "n": grid.n,
        "a_points": len(grid.a_nodes),
        "a_max": grid.a_max,
        "timings_seconds": timings,
        "versions": {
            "regime_stop": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    with open(out_dir / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out_dir}/surface.csv, boundary.csv, meta.json")
    return 0


def read_boundary_csv(path: Path) -> BoundaryCurve:
    """Load a boundary.csv written by solve; raises ConfigError on schema drift."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body or body[0] != "t,state,b_raw,b_smoothed":
        raise ConfigError(
            f"{path}: expected header 't,state,b_raw,b_smoothed', got "
            f"{body[0] if body else '<empty>'!r}"
        )
    recs = []
    for ln in body[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise ConfigError(f"{path}: malformed row {ln!r}")
        recs.append((float(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])))
    times = sorted({r[0] for r in recs})
    states = sorted({r[1] for r in recs})
    if states != list(range(len(states))):
        raise ConfigError(f"{path}: states must be 0..m-1, got {states}")
    b_raw = np.full((len(times), len(states)), np.nan)
    b_smooth = np.full_like(b_raw, np.nan)
    t_index = {t: i for i, t in enumerate(times)}
    for t, j, raw, smooth in recs:
        b_raw[t_index[t], j] = raw
        b_smooth[t_index[t], j] = smooth
    if np.isnan(b_raw).any():
        raise ConfigError(f"{path}: missing (t, state) combinations")
    return BoundaryCurve(
        times=np.asarray(times),
        b_raw=b_raw,
        b_smoothed=b_smooth,
        tol_abs=float("nan"),
        tol_rel=float("nan"),
        log_spacing=float("nan"),
    )


def cmd_oracle(
    config: RunConfig,
    boundary_path: Path,
    out_dir: Path,
    seed_override: Optional[int] = None,
    threads: int = 1,
) -> int:
    """Policy comparison table for a previously extracted boundary."""
    model = config.model()
    curve = read_boundary_csv(boundary_path)
    if curve.num_states != model.num_states:
        raise ConfigError(
            f"{boundary_path}: has {curve.num_states} state(s), "
            f"model has {model.num_states}"
        )
    precision = int(config["output.precision"])
    cfg_hash = config.config_hash()
    paths = int(config["mc.paths"])
    seed = _seeded(config, seed_override)

    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    t0, a0 = 0.0, 1.0
    root = np.random.SeedSequence(seed)
    for j, child in enumerate(root.spawn(model.num_states)):
        rng = np.random.default_rng(child)
        table = compare_policies(
            model, curve, t0, a0, j, paths, rng, threads=threads
        )
        for name, est, se in table:
            rows.append(
                (
                    name,
                    _fmt(t0, precision),
                    _fmt(a0, precision),
                    str(j),
                    _fmt(est, precision),
                    _fmt(se, precision),
                    str(paths),
                    str(seed),
                )
            )
    _write_csv(
        out_dir / "oracle.csv",
        "policy,t0,a,state,value,se,paths,seed",
        rows,
        cfg_hash,
    )
    print(f"wrote {out_dir}/oracle.csv")
    return 0


def cmd_bench(config: RunConfig, n_list: List[int], out_dir: Path) -> int:
    """Runtime per step count at fixed grid and quadrature, plus a power fit."""
    if len(n_list) < 3:
        print("error: bench needs at least 3 values of n", file=sys.stderr)
        return 1
    model = config.model()
    spec = config.quadrature()
    precision = int(config["output.precision"])
    cfg_hash = config.config_hash()

    # warm-up outside the timed region
    solve_surfaces(model, make_bench_grid(config, model, min(n_list)), spec)

    results = []
    for n in n_list:
        grid = make_bench_grid(config, model, n)
        t0 = time.perf_counter()
        solve_surfaces(model, grid, spec)
        results.append((n, time.perf_counter() - t0))

    logs_n = np.log([n for n, _ in results])
    logs_t = np.log([t for _, t in results])
    exponent = float(np.polyfit(logs_n, logs_t, 1)[0])

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "bench.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# config={cfg_hash}\n")
        fh.write("n,seconds\n")
        for n, secs in results:
            fh.write(f"{n},{_fmt(secs, precision)}\n")
        fh.write(f"# fitted_exponent={exponent:.4f}\n")
    print(f"fitted runtime exponent: {exponent:.3f}")
    print(f"wrote {out_dir}/bench.csv")
    return 0


def make_bench_grid(config: RunConfig, model, n: int):
    from .grids import make_grid

    a_max = config["grid.a_max"]
    return make_grid(
        model,
        n=n,
        a_points=int(config["grid.a_points"]),
        a_max=None if a_max == "auto" else float(a_max),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regime-stop",
        description=(
            "Optimal-stopping solver for selling a regime-switching "
            "geometric Brownian motion near its running maximum"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "solve", "oracle", "bench"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the run config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="RNG seed override")
        p.add_argument("--threads", type=int, default=1, help="worker pool cap")
        if name == "oracle":
            p.add_argument(
                "--boundary", required=True, help="boundary.csv from a solve run"
            )
        if name == "bench":
            p.add_argument(
                "--n-list",
                default="25,50,100",
                help="comma-separated step counts (need >= 3)",
            )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        out_dir = Path(args.out if args.out is not None else config["output.directory"])
        if args.command == "validate":
            return cmd_validate(config, out_dir)
        if args.command == "solve":
            return cmd_solve(config, out_dir, threads=args.threads)
        if args.command == "oracle":
            return cmd_oracle(
                config,
                Path(args.boundary),
                out_dir,
                seed_override=args.seed,
                threads=args.threads,
            )
        if args.command == "bench":
            n_list = [int(x) for x in str(args.n_list).split(",") if x.strip()]
            return cmd_bench(config, n_list, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ModelValidationError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
