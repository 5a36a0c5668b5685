"""SVG error plots (log-linear, with a machine-precision reference line)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .twin import ErrorRecord

MACHINE_EPS = float(np.finfo(np.float64).eps)
_FLOOR = 1e-18
_COMPONENTS = (
    ("err_observed", "observed"),
    ("err_unobserved", "unobserved"),
    ("err_total", "total"),
)


def _series(records: list[ErrorRecord], name: str) -> tuple[np.ndarray, np.ndarray]:
    t = np.array([r.time for r in records])
    v = np.array([getattr(r, name) for r in records])
    return t, np.maximum(v, _FLOOR)


def error_plot(records: list[ErrorRecord], path: str | Path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, label in _COMPONENTS:
        t, v = _series(records, name)
        ax.semilogy(t, v, label=label)
    ax.axhline(MACHINE_EPS, color="red", linestyle=":", linewidth=1, label="machine precision")
    ax.set_xlabel("time")
    ax.set_ylabel("L2 error")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def comparison_plot(series: dict[str, list[ErrorRecord]], path: str | Path, title: str = "") -> None:
    """Three panels (observed / unobserved / total), one curve per run."""
    fig, axes = plt.subplots(1, 3, figsize=(15, 4.2))
    for ax, (name, label) in zip(axes, _COMPONENTS):
        for run_label, records in series.items():
            t, v = _series(records, name)
            ax.semilogy(t, v, label=run_label)
        ax.axhline(MACHINE_EPS, color="red", linestyle=":", linewidth=1)
        ax.set_xlabel("time")
        ax.set_title(label)
        ax.grid(True, which="both", alpha=0.3)
    axes[0].set_ylabel("L2 error")
    axes[0].legend(loc="best", fontsize=7)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
