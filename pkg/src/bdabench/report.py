"""Plain-text, CSV and figure output for benchmark records."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import GIB, RunRecord  # noqa: E402

CSV_COLUMNS = (
    "workload",
    "ranks",
    "problem_bytes",
    "problem_size",
    "t_min",
    "t_mean",
    "t_max",
    "throughput",
    "architecture",
    "library",
    "threads",
    "version",
    "host",
)

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
_MARKERS = {"PCA": "o", "KMEANS": "s", "SVM": "^"}


def record_row(rec: RunRecord) -> dict:
    return {
        "workload": rec.config.workload.value,
        "ranks": rec.config.ranks,
        "problem_bytes": rec.problem_bytes,
        "problem_size": rec.problem_bytes / GIB,
        "t_min": rec.timing.t_min,
        "t_mean": rec.timing.t_mean,
        "t_max": rec.timing.t_max,
        "throughput": rec.throughput_gbs,
        **{k: rec.tags.get(k, "") for k in ("architecture", "library", "threads", "version")},
        "host": rec.host,
    }


def write_csv(records: Sequence[RunRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for rec in records:
            w.writerow(record_row(rec))


def summary_table(records: Sequence[RunRecord], mode: str = "") -> str:
    title = f"{mode} scaling" if mode else "benchmark runs"
    head = f"{'workload':<8} {'ranks':>5} {'size (MB)':>10} {'t_min (s)':>10} {'t_mean (s)':>10} {'t_max (s)':>10} {'GB/s':>9}"
    lines = [title, head, "-" * len(head)]
    for rec in records:
        lines.append(
            f"{rec.config.workload.value:<8} {rec.config.ranks:>5d} {rec.problem_bytes / 1e6:>10.2f} "
            f"{rec.timing.t_min:>10.4f} {rec.timing.t_mean:>10.4f} {rec.timing.t_max:>10.4f} "
            f"{rec.throughput_gbs:>9.4f}"
        )
    return "\n".join(lines) + "\n"


def scaling_figure(records: Sequence[RunRecord], path, mode: str = "weak") -> Path:
    """Slowest-rank kernel time against rank count, one line per workload."""
    series = defaultdict(list)
    for rec in records:
        series[rec.config.workload.value].append((rec.config.ranks, rec.timing.t_max))

    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for wl, pts in sorted(series.items()):
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=_MARKERS.get(wl, "o"), label=wl)
        ranks = sorted({r.config.ranks for r in records})
        ax.set_xscale("log", base=2)
        ax.set_xticks(ranks)
        ax.set_xticklabels([str(r) for r in ranks])
        ax.set_xlabel("ranks")
        ax.set_ylabel("max kernel wall time (s)")
        hint = {"weak": "flatter is better", "strong": "lower is better"}.get(mode, "")
        ax.set_title(f"{mode.capitalize()} scaling ({hint})" if hint else "Scaling")
        ax.legend(frameon=False)
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, dpi=120)
        plt.close(fig)
    return path
