"""Matplotlib figures for the report path: overlap traces and density sweeps.

These accompany the delimited outputs (trace CSVs, report JSON); the
figures are presentation artifacts, not the record of truth.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .records import TraceRow


def save_trace_figure(
    path: str | Path, traces: dict[str, list[TraceRow]], title: str = ""
) -> None:
    """Total overlap length versus epoch, one line per labeled trace."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, rows in traces.items():
        ax.plot([r.epoch for r in rows], [r.overlap_length for r in rows], label=label, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("total overlap length")
    if title:
        ax.set_title(title)
    if len(traces) > 1:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_density_figure(
    path: str | Path,
    counts: list[int],
    series: dict[str, list[float | None]],
    reference: list[float | None] | None = None,
    title: str = "",
) -> None:
    """Packing density versus object count, one line per method, with
    best-known reference values as stars where available."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, values in series.items():
        xs = [n for n, v in zip(counts, values) if v is not None]
        ys = [v for v in values if v is not None]
        ax.plot(xs, ys, marker="o", ms=4, lw=1.2, label=label)
    if reference is not None:
        xs = [n for n, v in zip(counts, reference) if v is not None]
        ys = [v for v in reference if v is not None]
        if xs:
            ax.plot(xs, ys, "k*", ms=10, ls="none", label="best known")
    ax.set_xlabel("number of objects")
    ax.set_ylabel("packing density")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
