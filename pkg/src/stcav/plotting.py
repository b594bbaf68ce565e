"""Static figures for run traces and comparison reports (Agg backend, PNG)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_PANELS = (
    ("comm_percent", "communications [% of time-triggered]"),
    ("avg_travel_time", "average travel time [s]"),
    ("avg_energy", "average 0.5 u^2 integral"),
    ("avg_fuel", "average fuel [ml]"),
)


def _label(row) -> str:
    if row["scheme"] == "self_triggered":
        return f"self (T_max={row['T_max']:g})"
    return row["scheme"].replace("time_triggered", "time").replace("_modified", " modified")


def _save(fig, path) -> Path:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    fig.savefig(tmp, format="png", dpi=110, metadata={"Software": None})
    plt.close(fig)
    tmp.replace(path)
    return path


def comparison_figure(report: dict, path) -> Path:
    """Grouped bars, one group per alpha and one bar per scheme variant."""
    rows = report["summary"]
    alphas = sorted({r["alpha"] for r in rows})
    labels = []
    for r in rows:
        if _label(r) not in labels:
            labels.append(_label(r))
    table = {(r["alpha"], _label(r)): r for r in rows}

    fig, axes = plt.subplots(2, 2, figsize=(11, 7))
    width = 0.8 / max(len(labels), 1)
    for ax, (metric, title) in zip(axes.flat, _PANELS):
        for i, lab in enumerate(labels):
            ys = [table[(a, lab)][metric] if (a, lab) in table else float("nan") for a in alphas]
            ax.bar([x + (i - (len(labels) - 1) / 2) * width for x in range(len(alphas))], ys, width, label=lab)
        ax.set_xticks(range(len(alphas)))
        ax.set_xticklabels([f"alpha={a:g}" for a in alphas])
        ax.set_title(title, fontsize=10)
        ax.grid(axis="y", alpha=0.3)
    axes.flat[0].legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def trajectory_figure(trace, path) -> Path:
    """Position, speed and control of every CAV; trigger instants marked on the control."""
    series = defaultdict(lambda: defaultdict(list))
    for t, vid, lane, x, v, u, *_rest in trace:
        s = series[(vid, lane)]
        s["t"].append(t)
        s["x"].append(x)
        s["v"].append(v)
        s["u"].append(u)
        if _rest[-2]:
            s["tt"].append(t)
            s["tu"].append(u)

    fig, axes = plt.subplots(3, 1, figsize=(10, 9), sharex=True)
    colors = {"main": "tab:blue", "ramp": "tab:orange"}
    for (vid, lane), s in series.items():
        c = colors.get(lane, "k")
        axes[0].plot(s["t"], s["x"], color=c, lw=0.8)
        axes[1].plot(s["t"], s["v"], color=c, lw=0.8)
        axes[2].step(s["t"], s["u"], where="post", color=c, lw=0.8)
        axes[2].plot(s["tt"], s["tu"], ".", color=c, ms=2)
    for lane, c in colors.items():
        axes[0].plot([], [], color=c, label=lane)
    axes[0].legend(fontsize=8)
    axes[0].set_ylabel("x [m]")
    axes[1].set_ylabel("v [m/s]")
    axes[2].set_ylabel("u [m/s^2]")
    axes[2].set_xlabel("t [s]")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)
