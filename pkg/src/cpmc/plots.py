"""Figure rendering for the CLI report paths.

Every figure is written to a file next to its CSV; nothing is shown
interactively (the Agg backend is forced so headless runs work).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["convergence_figure", "comparison_figure", "slice_figure"]


def convergence_figure(records, path, title="convergence") -> None:
    """Semilog plot of the three convergence criteria of one run."""
    sweeps = [rec.sweep for rec in records]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(sweeps, [rec.eps_mc for rec in records], "o-", label="eps_mc")
    ax.semilogy(sweeps, [rec.eps_grid_mean for rec in records], "s--", label="grid mean eps")
    ax.semilogy(sweeps, [rec.grad_norm for rec in records], "^:", label="grad RMS")
    ax.set_xlabel("sweep")
    ax.set_ylabel("criterion value")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def comparison_figure(records_by_method, path, title="method comparison") -> None:
    """Overlaid global-discrepancy curves, one per solver method."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for method, records in records_by_method.items():
        ax.semilogy(
            [rec.sweep for rec in records],
            [rec.eps_mc for rec in records],
            "o-",
            label=method,
        )
    ax.set_xlabel("sweep")
    ax.set_ylabel("eps_mc")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def slice_figure(oracle_grid, residual_grid, path, plane, title="plane section") -> None:
    """Side-by-side heat maps of the target values and the approximation error."""
    c1, c2 = plane
    extent = (1, oracle_grid.shape[1], 1, oracle_grid.shape[0])
    fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.2))
    for ax, grid, label in (
        (axes[0], oracle_grid, "target values"),
        (axes[1], residual_grid, "approximation error"),
    ):
        image = ax.imshow(
            np.asarray(grid), origin="lower", aspect="auto", extent=extent,
            cmap="viridis" if label == "target values" else "coolwarm",
        )
        ax.set_xlabel(f"coordinate {c2} node")
        ax.set_ylabel(f"coordinate {c1} node")
        ax.set_title(label)
        fig.colorbar(image, ax=ax, shrink=0.9)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
