"""Report figures rendered next to the CSV tables."""

from __future__ import annotations

import logging
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
    "svg.hashsalt": "ensemblefs",
}

MARKERS = {"UNION": "o", "INTERSECTION": "s", "QUORUM": "^",
           "RFE": "o", "SBS": "s", "UNIVARIATE": "^", "IMPORTANCE": "D"}


def savefig(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    logger.info("saving %s", path)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_cv_curves(rows, path: Path) -> Path:
    """Mean CV score per selector against the number of surviving features."""
    by_sel = defaultdict(list)
    for r in rows:
        by_sel[r["selector"]].append((r["n_features"], r["mean"], r["stdev"]))
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for sel, pts in by_sel.items():
            pts.sort()
            x = [p[0] for p in pts]
            y = [p[1] for p in pts]
            sd = [p[2] for p in pts]
            ax.errorbar(x, y, yerr=sd, marker=MARKERS.get(sel, "o"), ms=3, capsize=2, label=sel)
        ax.invert_xaxis()
        ax.set_xlabel("number of features")
        ax.set_ylabel("CV F1")
        ax.legend()
        return savefig(fig, path)


def plot_heuristic_curves(candidates, baselines, learner: str, path: Path) -> Path:
    """Test F1 per heuristic against iteration (left) and candidate size (right).

    Skipped (empty) candidates leave gaps.
    """
    series = defaultdict(list)
    for r in candidates:
        if r["learner"] != learner:
            continue
        f1 = r["metrics"]["f1"] if r["metrics"] else float("nan")
        series[r["heuristic"]].append((r["iteration"], r["size"], f1))
    with plt.rc_context(RC):
        fig, (ax_it, ax_sz) = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
        for h, pts in series.items():
            pts.sort()
            ax_it.plot([p[0] for p in pts], [p[2] for p in pts], marker=MARKERS.get(h, "o"), ms=3, label=h)
            by_size = sorted({(p[1], p[2]) for p in pts if p[1] > 0})
            ax_sz.plot([p[0] for p in by_size], [p[1] for p in by_size], marker=MARKERS.get(h, "o"),
                       ms=3, ls="", label=h)
        if learner in baselines:
            for ax in (ax_it, ax_sz):
                ax.axhline(baselines[learner]["f1"], color="k", ls="--", lw=0.8, label="full set")
        ax_it.set_xlabel("iteration")
        ax_sz.set_xlabel("number of features")
        ax_sz.invert_xaxis()
        ax_it.set_ylabel(f"test F1 ({learner})")
        ax_it.legend()
        return savefig(fig, path)


def plot_timing(timings, path: Path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        by_learner = defaultdict(list)
        for r in timings:
            by_learner[r["learner"]].append((r["feature_count"], r["train_seconds"], r["test_seconds"]))
        for name, pts in by_learner.items():
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=f"{name} train")
            ax.plot([p[0] for p in pts], [p[2] for p in pts], marker="x", ms=3, ls=":", label=f"{name} test")
        ax.set_xlabel("number of features")
        ax.set_ylabel("seconds")
        ax.legend()
        return savefig(fig, path)


def render_report_figures(report, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    if report.cv_curves:
        paths.append(plot_cv_curves(report.cv_curves, out_dir / "cv_curves.png"))
    learners = sorted({r["learner"] for r in report.candidates})
    for name in learners:
        paths.append(plot_heuristic_curves(report.candidates, report.baselines, name,
                                           out_dir / f"heuristics_{name}.png"))
    if report.timings:
        paths.append(plot_timing(report.timings, out_dir / "timing.png"))
    return paths
