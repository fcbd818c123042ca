"""Headless figure rendering for pipeline outputs.

Each function writes a PNG next to the delimited output it illustrates and
returns the path. The Agg backend is forced so the renderers work in batch
jobs without a display.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_spectrum_shift(reports, path):
    """Eigenvalue profiles and test-graph importance for a kappa sweep.

    Left panel: sorted eigenvalues against their normalized rank, one curve
    per kappa, showing how side information pulls the lower spectrum edge.
    Right panel: per-eigenvector importance against its eigenvalue.
    """
    if not reports:
        raise ValueError("need at least one spectrum report")
    path = Path(path)
    fig, (ax_spec, ax_imp) = plt.subplots(1, 2, figsize=(10, 4))
    for report in reports:
        lam = report.eigenvalues
        rank = np.linspace(0.0, 1.0, len(lam))
        label = f"kappa={report.kappa:g}"
        ax_spec.plot(rank, lam, lw=1.2, label=label)
        ax_imp.plot(lam, report.importance, ".", ms=2.5, alpha=0.6, label=label)
    ax_spec.set_xlabel("normalized rank")
    ax_spec.set_ylabel("eigenvalue")
    ax_spec.axhline(0.0, color="0.8", lw=0.8, zorder=0)
    ax_spec.legend(fontsize=8)
    ax_imp.set_xlabel("eigenvalue")
    ax_imp.set_ylabel("test-graph importance")
    ax_imp.legend(fontsize=8, markerscale=3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_training_history(history, path):
    """Mean BPR loss and validation NDCG@20 per epoch on twin axes."""
    if not history:
        raise ValueError("empty training history")
    path = Path(path)
    epochs = [row["epoch"] for row in history]
    fig, ax_loss = plt.subplots(figsize=(6, 4))
    ax_loss.plot(epochs, [row["loss"] for row in history], color="tab:red", lw=1.4)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("BPR loss", color="tab:red")
    ax_loss.tick_params(axis="y", labelcolor="tab:red")
    ax_metric = ax_loss.twinx()
    ax_metric.plot(epochs, [row["ndcg@20"] for row in history],
                   color="tab:blue", lw=1.4)
    ax_metric.set_ylabel("val NDCG@20", color="tab:blue")
    ax_metric.tick_params(axis="y", labelcolor="tab:blue")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_grid_heatmap(rows, path, metric="val_ndcg@20"):
    """One mu-by-delta heatmap per kappa over the searched grid cells.

    Cells that were pruned from the sweep (e.g. by the around-estimate
    restriction) stay blank.
    """
    if not rows:
        raise ValueError("no grid rows to plot")
    path = Path(path)
    kappas = sorted({row["kappa"] for row in rows})
    mus = sorted({row["mu"] for row in rows})
    deltas = sorted({row["delta"] for row in rows})
    mu_pos = {m: i for i, m in enumerate(mus)}
    delta_pos = {d: i for i, d in enumerate(deltas)}
    values = np.array([row[metric] for row in rows], dtype=np.float64)
    vmin, vmax = values.min(), values.max()

    fig, axes = plt.subplots(1, len(kappas), figsize=(3.2 * len(kappas) + 1, 3.4),
                             squeeze=False)
    last_image = None
    for ax, kappa in zip(axes[0], kappas):
        cells = np.full((len(deltas), len(mus)), np.nan)
        for row in rows:
            if row["kappa"] == kappa:
                cells[delta_pos[row["delta"]], mu_pos[row["mu"]]] = row[metric]
        last_image = ax.imshow(cells, origin="lower", aspect="auto",
                               vmin=vmin, vmax=vmax, cmap="viridis")
        ax.set_title(f"kappa={kappa:g}", fontsize=9)
        ax.set_xticks(range(len(mus)), [f"{m:g}" for m in mus],
                      fontsize=7, rotation=90)
        ax.set_yticks(range(len(deltas)), [f"{d:g}" for d in deltas], fontsize=7)
        ax.set_xlabel("mu", fontsize=8)
    axes[0][0].set_ylabel("delta", fontsize=8)
    fig.colorbar(last_image, ax=axes[0], label=metric, fraction=0.05)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_noise_curve(deltas, means, stds, path, metric="ndcg@20"):
    """Mean metric with one-standard-deviation error bars against noise level."""
    deltas = np.asarray(deltas, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    stds = np.asarray(stds, dtype=np.float64)
    if not (deltas.shape == means.shape == stds.shape):
        raise ValueError("deltas, means and stds must have matching shapes")
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.errorbar(deltas, means, yerr=stds, marker="o", ms=4, capsize=3, lw=1.4)
    ax.set_xlabel("noise intensity")
    ax.set_ylabel(metric)
    ax.set_ylim(bottom=0.0)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
