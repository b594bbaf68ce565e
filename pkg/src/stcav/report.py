"""Scheme comparison grids, tabular reports and figures."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .config import ScenarioConfig, from_dict
from .sim import TRACE_COLUMNS, run

BASELINE = "time_triggered"
SUMMARY_METRICS = ("avg_travel_time", "avg_energy", "avg_fuel", "total_communications",
                   "comm_percent")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def metrics_json(metrics: dict) -> str:
    return json.dumps(metrics, indent=2, sort_keys=True, allow_nan=True) + "\n"


def trace_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for row in rows:
        w.writerow("" if q is None else (int(q) if isinstance(q, bool) else q) for q in row)
    return buf.getvalue()


@dataclass(frozen=True)
class Cell:
    alpha: float
    scheme: str
    T_max: float
    seed: int
    hidden: bool = False

    @property
    def key(self):
        return (self.alpha, self.scheme, self.T_max)


def grid_cells(alphas, schemes, seeds, T_maxes) -> list[Cell]:
    """Every (alpha, scheme, T_max, seed) combination to run.

    ``T_max`` only matters for the self-triggered scheme; the baselines run
    once per (alpha, seed).  The time-triggered baseline is added as a hidden
    cell when it is not requested, so percentages are always defined.
    """
    cells = []
    want = list(schemes)
    if BASELINE not in want:
        want.append(BASELINE)
    for alpha in alphas:
        for scheme in want:
            tmaxes = T_maxes if scheme == "self_triggered" else [T_maxes[0]]
            for T_max in tmaxes:
                for seed in seeds:
                    cells.append(Cell(alpha, scheme, T_max, seed, hidden=scheme not in schemes))
    return cells


def run_cell(raw: dict, cell: Cell) -> dict:
    """Worker entry point: run one cell and return its metrics, or the error."""
    data = dict(raw)
    data.update(scheme=cell.scheme, alpha=cell.alpha, T_max=cell.T_max, seed=cell.seed)
    try:
        m = run(from_dict(data)).metrics.to_dict()
    except Exception as exc:  # reported per cell, never fatal for the grid
        return {"error": f"{type(exc).__name__}: {exc}"}
    m.pop("per_cav")
    return m


def run_grid(cfg: ScenarioConfig, cells: Sequence[Cell], workers: Optional[int] = None) -> list[dict]:
    raws = [cfg.raw] * len(cells)
    workers = workers or min(len(cells), os.cpu_count() or 1)
    if workers <= 1 or len(cells) <= 1:
        return [run_cell(r, c) for r, c in zip(raws, cells)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, raws, cells))


def _mean(xs):
    xs = [x for x in xs if x is not None and not math.isnan(x)]
    return sum(xs) / len(xs) if xs else float("nan")


def build_report(cells: Sequence[Cell], results: Sequence[dict]) -> dict:
    """Per-cell records plus a summary averaged over seeds.

    The communication percentage compares totals over the same seed set
    against the time-triggered baseline at the same alpha.
    """
    base = {}
    for c, r in zip(cells, results):
        if c.scheme == BASELINE and "error" not in r:
            base[(c.alpha, c.seed)] = r["total_communications"]

    out_cells = []
    for c, r in zip(cells, results):
        if c.hidden:
            continue
        rec = {"alpha": c.alpha, "scheme": c.scheme, "T_max": c.T_max, "seed": c.seed}
        if "error" in r:
            rec["error"] = r["error"]
        else:
            b = base.get((c.alpha, c.seed))
            rec.update({k: r[k] for k in ("n_completed", "avg_travel_time", "avg_energy", "avg_fuel",
                                          "total_communications", "min_trigger_gap",
                                          "infeasible_events", "truncated")})
            rec["n_violations"] = len(r["violations"])
            rec["comm_percent"] = 100.0 * r["total_communications"] / b if b else float("nan")
        out_cells.append(rec)

    summary = []
    keys = []
    for c in cells:
        if not c.hidden and c.key not in keys:
            keys.append(c.key)
    for alpha, scheme, T_max in keys:
        group = [(c, r) for c, r in zip(cells, results) if c.key == (alpha, scheme, T_max)]
        ok = [(c, r) for c, r in group if "error" not in r]
        seeds = [c.seed for c, _ in ok if (alpha, c.seed) in base]
        total = sum(r["total_communications"] for c, r in ok if c.seed in seeds)
        b_total = sum(base[(alpha, s)] for s in seeds)
        summary.append({
            "alpha": alpha, "scheme": scheme, "T_max": T_max if scheme == "self_triggered" else None,
            "seeds": len(ok), "failed": len(group) - len(ok),
            "avg_travel_time": _mean([r["avg_travel_time"] for _, r in ok]),
            "avg_energy": _mean([r["avg_energy"] for _, r in ok]),
            "avg_fuel": _mean([r["avg_fuel"] for _, r in ok]),
            "total_communications": sum(r["total_communications"] for _, r in ok),
            "comm_percent": 100.0 * total / b_total if b_total else float("nan"),
            "n_violations": sum(len(r["violations"]) for _, r in ok),
        })
    return {"cells": out_cells, "summary": summary}


def report_csv(report: dict) -> str:
    cols = ("alpha", "scheme", "T_max", "seeds", "failed") + SUMMARY_METRICS + ("n_violations",)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in report["summary"]:
        w.writerow({k: ("" if row.get(k) is None else row[k]) for k in cols})
    return buf.getvalue()


def plot_data_csv(report: dict) -> str:
    """Long format: one (alpha, scheme, T_max, metric, value) row per summary entry."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("alpha", "scheme", "T_max", "metric", "value"))
    for row in report["summary"]:
        for metric in SUMMARY_METRICS:
            w.writerow((row["alpha"], row["scheme"], "" if row["T_max"] is None else row["T_max"],
                        metric, row[metric]))
    return buf.getvalue()


def write_report(report: dict, out_dir, figures: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    atomic_write(out / "report.csv", report_csv(report))
    atomic_write(out / "plot_data.csv", plot_data_csv(report))
    written = [out / "report.json", out / "report.csv", out / "plot_data.csv"]
    if figures:
        from .plotting import comparison_figure

        written.append(comparison_figure(report, out / "comparison.png"))
    return written
