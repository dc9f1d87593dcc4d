"""Figure rendering for the CLI report paths."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib import ticker  # noqa: E402


def _fmt_bytes(n: float) -> str:
    for unit in ("B", "KB", "MB", "GB"):
        if abs(n) < 1024 or unit == "GB":
            return f"{n:.0f}{unit}" if unit == "B" else f"{n:.1f}{unit}"
        n /= 1024
    return f"{n:.1f}GB"


def save_pareto_figure(points, path: str, title: str = "Resource frontier"):
    """Client vs server resident bytes for each frontier plan."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    xs = [p.client_bytes for p in points]
    ys = [p.server_bytes for p in points]
    order = sorted(range(len(points)), key=lambda i: (xs[i], ys[i]))
    ax.plot([xs[i] for i in order], [ys[i] for i in order],
            color="#888888", linestyle="--", linewidth=1, zorder=1)
    ax.scatter(xs, ys, color="#1f77b4", s=45, zorder=2)
    for p in points:
        ax.annotate(p.plan.plan_id[:6], (p.client_bytes, p.server_bytes),
                    textcoords="offset points", xytext=(6, 5), fontsize=8)
    ax.set_xlabel("client bytes")
    ax.set_ylabel("server bytes")
    ax.set_title(title)
    ax.grid(True, linewidth=0.3, alpha=0.6)
    for axis in (ax.xaxis, ax.yaxis):
        axis.set_major_formatter(
            ticker.FuncFormatter(lambda v, _pos: _fmt_bytes(v)))
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_figure(rows, path: str, title: str = "Interaction latency"):
    """Bars of p50/p95/max per interaction with its bound marked."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    names = [r["interaction"] for r in rows]
    x = range(len(rows))
    width = 0.25
    for offset, key, color in ((-width, "p50_ms", "#2ca02c"),
                               (0.0, "p95_ms", "#ff7f0e"),
                               (width, "max_ms", "#d62728")):
        ax.bar([i + offset for i in x], [r[key] for r in rows],
               width=width, label=key.replace("_ms", ""), color=color)
    for i, r in enumerate(rows):
        ax.hlines(r["bound_ms"], i - 0.45, i + 0.45, color="black",
                  linestyle=":", linewidth=1.2)
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("latency (ms)")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, axis="y", linewidth=0.3, alpha=0.6)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
