"""Figure rendering for experiment reports.

matplotlib is imported lazily with the non-interactive Agg backend, so the
library itself never needs it; only report runs with figures enabled do.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = ["Series", "FigureSpec", "render"]


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    style: str = "-"
    yerr: Sequence[float] | None = None


@dataclass
class FigureSpec:
    filename: str
    series: list[Series]
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    logx: bool = False
    logy: bool = False
    notes: list[str] = field(default_factory=list)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def render(spec: FigureSpec, out_dir: Path) -> Path:
    """Draw one figure to ``out_dir / spec.filename`` and return the path."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for s in spec.series:
        x, y = np.asarray(s.x, float), np.asarray(s.y, float)
        if s.yerr is not None:
            ax.errorbar(x, y, yerr=np.asarray(s.yerr, float), fmt=s.style, label=s.label or None,
                        capsize=2, lw=1)
        else:
            ax.plot(x, y, s.style, label=s.label or None, lw=1)
    if spec.logx:
        ax.set_xscale("log")
    if spec.logy:
        ax.set_yscale("log")
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    if spec.title:
        ax.set_title(spec.title, fontsize=10)
    if any(s.label for s in spec.series):
        ax.legend(fontsize=8, frameon=False)
    for k, note in enumerate(spec.notes):
        ax.text(0.02, 0.02 + 0.06 * k, note, transform=ax.transAxes, fontsize=8)
    fig.tight_layout()
    target = Path(out_dir) / spec.filename
    # Fixed metadata keeps repeated renders identical.
    fig.savefig(target, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return target
