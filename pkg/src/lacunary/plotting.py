"""Figures for schedule scans. Uses the Agg backend so it runs headless."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "savefig.dpi": 120,
}


def _save(fig, path: Path):
    fig.tight_layout()
    # dropping the Software tag keeps PNG bytes independent of the matplotlib version
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_lset_report(report, out_dir, stem: str = "certify") -> list[Path]:
    """Density and partition constants, and operator ratios, against the schedule.

    Writes ``<stem>_constants.png`` and ``<stem>_ratio.png``; returns the paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [w.label for w in report.windows]
    x = range(len(labels))
    paths = []
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(x, report.series("D"), "o-", label="density D")
        ax.plot(x, report.series("bridge"), "s--", label="C1^2 + C2^2")
        ax.plot(x, report.series("C"), "^-", label="partition C")
        ax.plot(x, report.series("split"), "v:", label="split value")
        ax.set_xticks(list(x), labels, rotation=30, ha="right")
        ax.set_ylabel("constant")
        ax.set_title(f"verdict: {report.verdict}")
        ax.legend()
        p = out_dir / f"{stem}_constants.png"
        _save(fig, p)
        paths.append(p)

        ratios = report.series("ratio")
        if any(not math.isnan(r) for r in ratios):
            fig, ax = plt.subplots()
            radii = [w.ratio.get("radius") if w.ratio else None for w in report.windows]
            ax.plot(x, ratios, "o-")
            ax.set_xticks(list(x), [f"{l}\nR={r}" for l, r in zip(labels, radii)], rotation=30, ha="right")
            ax.set_ylabel("truncated norm / square-function bound")
            ax.set_title("operator ratio (lower bounds)")
            p = out_dir / f"{stem}_ratio.png"
            _save(fig, p)
            paths.append(p)
    return paths


def plot_ratio_schedule(radii, ratios, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(list(radii), list(ratios), "o-")
        ax.set_xlabel("truncation radius R")
        ax.set_ylabel("ratio")
        _save(fig, path)
    return path


def plot_lpp_ratios(ratios, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist(list(ratios), bins=40)
        ax.axvline(1.0, color="k", lw=1)
        ax.set_xlabel("LHS / RHS")
        ax.set_ylabel("instances")
        _save(fig, path)
    return path
