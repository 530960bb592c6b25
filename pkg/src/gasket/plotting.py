"""Figure rendering for CLI report paths.

Each helper draws one matplotlib figure to a file and returns the path.
The Agg backend is forced so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_META = {"Software": None}


def _finish(fig, path: str) -> str:
    fig.savefig(path, dpi=130, bbox_inches="tight", metadata=_META)
    plt.close(fig)
    return path


def save_scatter(path: str, xy: np.ndarray, values: np.ndarray,
                 title: str) -> str:
    """Vertex values over the planar embedding."""
    fig, ax = plt.subplots(figsize=(5.4, 4.8))
    sc = ax.scatter(xy[:, 0], xy[:, 1], c=values, s=9, cmap="viridis")
    fig.colorbar(sc, ax=ax, shrink=0.85)
    ax.set_aspect("equal")
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    return _finish(fig, path)


def save_loglog(path: str, x: np.ndarray, y: np.ndarray, slope: float,
                xlabel: str, ylabel: str, title: str) -> str:
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.loglog(x, y, "o-", ms=4)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(f"{title} (slope {slope:.4f})")
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)


def save_curves(path: str, x: np.ndarray, curves: dict, xlabel: str,
                ylabel: str, title: str, logy: bool = False) -> str:
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for name, y in curves.items():
        if logy:
            ax.semilogy(x, y, "o-", ms=4, label=name)
        else:
            ax.plot(x, y, "o-", ms=4, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_spectrum(path: str, eigenvalues: np.ndarray, title: str) -> str:
    """Eigenvalue counting function on log-log axes."""
    lam = np.asarray(eigenvalues)
    pos = lam[lam > 0]
    n = np.arange(1, pos.size + 1)
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.loglog(pos, n, ".", ms=3)
    ax.set_xlabel("eigenvalue")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)
