"""Figures written next to scan and calibration reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}


def plot_scan(trace: dict, detections, th_sig: dict, path: str | Path, title: str = "") -> Path:
    """First-sample fused similarity per programme against stream offset.

    Vertical ticks mark reported detections; dashed lines the threshold.
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(9, 3.2))
        for pid in sorted(trace):
            pts = trace[pid]
            line, = ax.plot([o for o, _ in pts], [s for _, s in pts], lw=0.7, label=pid)
            ax.axhline(th_sig[pid], color=line.get_color(), ls="--", lw=0.5)
            for d in detections:
                if d.program_id == pid:
                    ax.axvline(d.stream_offset, color=line.get_color(), lw=1.2, alpha=0.6)
        ax.set_xlabel("stream offset (frames)")
        ax.set_ylabel("fused similarity")
        ax.set_ylim(0, 1.02)
        if title:
            ax.set_title(title)
        if len(trace) <= 12:
            ax.legend(fontsize=7, loc="center left", bbox_to_anchor=(1.0, 0.5))
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_calibration(reports: dict, path: str | Path) -> Path:
    """Recall, precision and weight per channel and descriptor as grouped bars."""
    channels = sorted(reports)
    metrics = ("recall", "precision", "weight")
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3), sharey=True)
        for ax, descriptor in zip(axes, ("ccv", "poi")):
            width = 0.8 / len(metrics)
            for m, metric in enumerate(metrics):
                xs = [c + (m - 1) * width for c in range(len(channels))]
                ax.bar(xs, [getattr(reports[ch][descriptor], metric) for ch in channels],
                       width, label=metric)
            ax.set_xticks(range(len(channels)), channels)
            ax.set_title(descriptor.upper())
            ax.set_ylim(0, 1.25)
        axes[0].legend(fontsize=7, ncol=3, loc="upper left")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)
