"""Self-contained SVG plots.  Output is byte-stable for identical inputs."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {"svg.hashsalt": "dptune", "svg.fonttype": "none"}


def _to_svg(fig) -> str:
    buf = io.StringIO()
    # no Date metadata, fixed hash salt: identical inputs give identical bytes
    fig.savefig(buf, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return buf.getvalue()


def line_plot_svg(x, series: dict, xlabel="", ylabel="", title="") -> str:
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, y in series.items():
            ax.plot(x, y, marker="o", markersize=3, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(alpha=0.3)
        ax.legend()
        return _to_svg(fig)


def scatter_errorbar_svg(x, y, yerr, labels, xlabel="", ylabel="", title="") -> str:
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for xi, yi, ei, label in zip(x, y, yerr, labels):
            ax.errorbar([xi], [yi], yerr=[ei], fmt="o", capsize=4, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(alpha=0.3)
        ax.legend()
        return _to_svg(fig)
