"""Matplotlib rendering for overlap and convergence displays.

Figures default to SVG next to the delimited output so results stay
diffable; the SVG writer is pinned to a fixed hash salt and no embedded
date, which keeps rerenders byte-identical for the replay checks.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "chanmdn"
matplotlib.rcParams["svg.fonttype"] = "none"

from matplotlib.figure import Figure  # noqa: E402


def _save(fig: Figure, path: Path) -> None:
    if path.suffix.lower() == ".svg":
        fig.savefig(path, metadata={"Date": None})
    else:
        fig.savefig(path)


def overlap_figure(
    grid: np.ndarray,
    kde_genuine: np.ndarray,
    kde_generated: np.ndarray,
    oa: float,
    d: float,
    scenario: str,
    path: str | Path,
) -> None:
    """Both KDE curves with the shaded pointwise-minimum overlap region."""
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot(111)
    lower = np.minimum(kde_genuine, kde_generated)
    ax.fill_between(grid, lower, color="0.8", label=f"overlapped area = {oa:.3f}")
    ax.plot(grid, kde_genuine, color="tab:blue", lw=1.6, label="genuine")
    ax.plot(grid, kde_generated, color="tab:red", lw=1.6, ls="--", label="generated")
    ax.set_xlabel("receiving power (scaled)")
    ax.set_ylabel("density")
    ax.set_title(f"{scenario}, d = {d:g} m")
    ax.legend(loc="upper right")
    fig.tight_layout()
    _save(fig, Path(path))


def oa_profile_figure(
    distances: np.ndarray, oas: np.ndarray, scenario: str, path: str | Path
) -> None:
    """Per-distance OA profile emitted alongside the evaluation tables."""
    fig = Figure(figsize=(7.0, 4.0))
    ax = fig.add_subplot(111)
    ax.plot(distances, oas, marker="o", ms=4, color="tab:blue")
    ax.set_xlabel("distance (m)")
    ax.set_ylabel("overlapped area")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"{scenario}: per-distance overlap")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, Path(path))


def convergence_figure(rows: list[tuple], scenario: str, path: str | Path) -> None:
    """Validation MOA versus epoch, one line per training iteration.

    Rows are (iteration, epoch, nll, avg_oa, moa) as written to curves.csv.
    """
    fig = Figure(figsize=(7.0, 4.0))
    ax = fig.add_subplot(111)
    iterations = sorted({r[0] for r in rows})
    for it in iterations:
        pts = [(r[1], r[4]) for r in rows if r[0] == it]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", ms=3, label=f"iteration {it}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("validation MOA")
    ax.set_title(f"{scenario}: training convergence")
    ax.grid(True, alpha=0.3)
    if iterations:
        ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, Path(path))
