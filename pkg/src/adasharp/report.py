"""Static SVG rate-quality plots."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# Stable element ids so repeated runs write identical files.
matplotlib.rcParams["svg.hashsalt"] = "adasharp"


def plot_rd_curves(curves: dict, path, title: str = "") -> None:
    """Plot ``{label: RdCurve}`` (one metric) as rate/quality lines into an SVG."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    metric = ""
    for label, curve in curves.items():
        metric = curve.metric_name
        ax.plot(curve.rates, curve.qualities, marker="o", label=label)
    ax.set_xlabel("rate (kbit/s)")
    ax.set_ylabel(metric)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
