"""Command-line front end: ``stcav run | compare | oracle``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import SCHEMES, ConfigError, load_config
from .oracles import ORACLES, run_oracle
from .report import atomic_write, build_report, grid_cells, metrics_json, run_grid, trace_csv, write_report
from .sim import run

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNSAFE = 0, 1, 2, 3
OUT_ENV = "STCAV_OUT"

log = logging.getLogger("stcav")


def _floats(text: str) -> list[float]:
    try:
        return [float(q) for q in text.split(",") if q.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(q) for q in text.split(",") if q.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _schemes(text: str) -> list[str]:
    out = [q.strip() for q in text.split(",") if q.strip()]
    bad = [q for q in out if q not in SCHEMES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown scheme(s) {bad}; choose from {SCHEMES}")
    return out


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV)
    if not out:
        raise ConfigError(f"no output directory: pass --out or set {OUT_ENV}")
    return Path(out)


def _report_violations(violations) -> None:
    for v in violations:
        print(f"safety violation: {json.dumps(v, sort_keys=True)}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed)
        out = _out_dir(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    result = run(cfg, trace=True)
    m = result.metrics
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "metrics.json", metrics_json(m.to_dict()))
    atomic_write(out / "trace.csv", trace_csv(result.trace))
    if not args.no_figures:
        from .plotting import trajectory_figure

        trajectory_figure(result.trace, out / "trajectories.png")
    print(f"{m.scheme} alpha={m.alpha:g} seed={m.seed}: {m.n_completed}/{m.n_arrivals} CAVs, "
          f"travel {m.avg_travel_time:.3f} s, energy {m.avg_energy:.3f}, fuel {m.avg_fuel:.3f}, "
          f"communications {m.total_communications}")
    if m.violations:
        _report_violations(m.violations)
        return EXIT_UNSAFE
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        cfg = load_config(args.config)
        out = _out_dir(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    alphas = args.alphas or [cfg.alpha]
    schemes = args.schemes or list(SCHEMES)
    seeds = args.seeds or [cfg.seed]
    T_maxes = args.tmax or [cfg.T_max]
    # validate every override before starting the grid
    try:
        for a in alphas:
            for tm in T_maxes:
                cfg.with_overrides(alpha=a, T_max=tm)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    cells = grid_cells(alphas, schemes, seeds, T_maxes)
    results = run_grid(cfg, cells, workers=args.workers)
    report = build_report(cells, results)
    write_report(report, out, figures=not args.no_figures)

    code = EXIT_OK
    for rec in report["cells"]:
        if "error" in rec:
            print(f"cell failed: {json.dumps(rec, sort_keys=True)}", file=sys.stderr)
            code = max(code, EXIT_FAIL)
        elif rec["n_violations"]:
            print(f"cell has {rec['n_violations']} safety violation(s): alpha={rec['alpha']:g} "
                  f"scheme={rec['scheme']} T_max={rec['T_max']:g} seed={rec['seed']}", file=sys.stderr)
            code = EXIT_UNSAFE
    for row in report["summary"]:
        tm = "" if row["T_max"] is None else f" T_max={row['T_max']:g}"
        print(f"alpha={row['alpha']:g} {row['scheme']}{tm}: travel {row['avg_travel_time']:.3f} s, "
              f"energy {row['avg_energy']:.3f}, fuel {row['avg_fuel']:.3f}, "
              f"comms {row['total_communications']} ({row['comm_percent']:.1f}%)")
    return code


def cmd_oracle(args) -> int:
    rep = run_oracle(args.which, args.cases, args.seed)
    status = "PASS" if rep.passed else "FAIL"
    print(f"{rep.which}: cases={rep.cases} max_deviation={rep.max_deviation:.3e} "
          f"tolerance={rep.tolerance:g} failures={rep.failures} {status}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stcav", description="Self-triggered CBF-QP merging simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV})")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-figures", action="store_true", help="skip the trajectory figure")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run a scheme comparison grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV})")
    p.add_argument("--alphas", type=_floats)
    p.add_argument("--schemes", type=_schemes)
    p.add_argument("--seeds", type=_ints)
    p.add_argument("--tmax", type=_floats, help="T_max values for the self-triggered scheme")
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--no-figures", action="store_true", help="skip the comparison figure")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="cross-check against an independent oracle")
    p.add_argument("--which", required=True, choices=ORACLES)
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
