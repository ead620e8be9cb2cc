"""Matplotlib report figures, rendered headlessly to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update(
    {
        "figure.figsize": (8.0, 4.0),
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 10,
    }
)


def save_figure(fig, path, dpi: int = 140) -> None:
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)


def loss_curve_figure(losses, val_history=None):
    fig, ax = plt.subplots()
    ax.plot(np.arange(len(losses)), losses, lw=1.0, label="training loss")
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("batch reconstruction loss")
    if val_history:
        ax2 = ax.twinx()
        its, rmses = zip(*val_history)
        ax2.plot(its, rmses, "r.-", ms=3, lw=0.8, label="validation RMSE")
        ax2.set_ylabel("validation RMSE (z-scored)", color="r")
        ax2.grid(False)
    ax.legend(loc="upper right")
    return fig


def window_metrics_figure(report):
    fig, ax = plt.subplots()
    starts = [w.start for w in report.windows]
    ax.plot(starts, [w.rmse for w in report.windows], "o-", ms=3, lw=1.0, label="RMSE")
    ax.plot(starts, [w.mae for w in report.windows], "s-", ms=3, lw=1.0, label="MAE")
    ax.set_xlabel("window start (time step)")
    ax.set_ylabel("error")
    ax.set_title(f"per-window kriging error (pooled RMSE {report.rmse:.4g}, R2 {report.r2:.3f})")
    ax.legend()
    return fig


def series_overlay_figure(t, truth, estimate, valid=None, title: str = ""):
    fig, ax = plt.subplots()
    t = np.asarray(t)
    truth = np.asarray(truth, dtype=np.float64)
    if valid is not None:
        truth = np.where(np.asarray(valid, dtype=bool), truth, np.nan)
    ax.plot(t, truth, lw=1.0, label="truth")
    ax.plot(t, estimate, lw=1.0, ls="--", label="estimate")
    ax.set_xlabel("time step")
    ax.set_ylabel("signal")
    if title:
        ax.set_title(title)
    ax.legend()
    return fig


def virtual_line_figure(estimates, endpoint_a=None, endpoint_b=None, title: str = ""):
    """Virtual sensors along a segment, bracketed by the endpoint signals."""
    fig, ax = plt.subplots()
    est = np.asarray(estimates, dtype=np.float64)
    t = np.arange(est.shape[1])
    if endpoint_a is not None:
        ax.plot(t, endpoint_a, "k-", lw=1.4, label="endpoint a")
    cmap = plt.get_cmap("viridis")
    for i in range(est.shape[0]):
        frac = (i + 1) / (est.shape[0] + 1)
        ax.plot(t, est[i], color=cmap(frac), lw=0.9, label=f"virtual {i} ({frac:.2f})")
    if endpoint_b is not None:
        ax.plot(t, endpoint_b, "k--", lw=1.4, label="endpoint b")
    ax.set_xlabel("time step")
    ax.set_ylabel("signal")
    if title:
        ax.set_title(title)
    if est.shape[0] <= 8:
        ax.legend(fontsize=8)
    return fig
