"""Static SVG of a score trace with threshold, label spans and warnings."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .scoring import ScoreSeries, early_warnings  # noqa: E402


def label_runs(labels) -> list[tuple[int, int]]:
    """Half-open ``[start, stop)`` runs of positive labels."""
    lab = np.asarray(labels).astype(bool).astype(np.int8)
    edges = np.diff(np.concatenate([[0], lab, [0]]))
    return list(zip(np.flatnonzero(edges == 1).tolist(), np.flatnonzero(edges == -1).tolist()))


def plot_scores(series: ScoreSeries, labels, path, h: int = 16, f: int = 16) -> Path:
    """Write one deterministic SVG line chart to ``path``."""
    path = Path(path)
    t = np.arange(len(series.scores))
    with plt.rc_context({"svg.hashsalt": "igcl", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(10, 3))
        ax.plot(t, series.scores, lw=0.8, color="tab:blue", label="score")
        if labels is not None:
            for a, b in label_runs(labels):
                ax.axvspan(a - 0.5, b - 0.5, color="tab:red", alpha=0.25, lw=0)
        if series.delta is not None:
            ax.axhline(series.delta, color="k", ls="--", lw=0.8, label="delta")
            if labels is not None:
                warns = early_warnings(series, labels, h, f)
                if warns:
                    x = [w.first_flag for w in warns]
                    ax.plot(x, series.scores[x], "v", color="tab:orange", ms=5, label="warning")
        ax.set_xlabel("t")
        ax.set_ylabel("score")
        ax.legend(loc="upper right", fontsize=7)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return path
