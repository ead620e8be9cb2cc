"""Text artifacts for CLI runs: delimited output, JSON metrics, SVG.

Numbers are formatted with ``repr`` so identical runs give identical
bytes; NaN and infinities become ``null`` in JSON. The SVG chart is
hand-built markup with no renderer behind it, small enough to open in
any browser for a quick look at one sensor's reconstruction.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .kriging import MetricsReport


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def metrics_dict(report: MetricsReport) -> dict:
    return {
        "rmse": _clean(report.rmse),
        "mae": _clean(report.mae),
        "mape_percent": _clean(report.mape_percent),
        "r2": _clean(report.r2),
        "entries": report.entries,
    }


def write_metrics_json(path, report: MetricsReport, baselines: dict | None = None, extra: dict | None = None) -> None:
    """Schema: the metric block plus a per-window list, optional
    ``baselines`` blocks keyed by name, and free-form ``run`` info."""
    payload = metrics_dict(report)
    payload["windows"] = [
        {
            "start": w.start,
            "rmse": _clean(w.rmse),
            "mae": _clean(w.mae),
            "mape_percent": _clean(w.mape_percent),
            "r2": _clean(w.r2),
            "entries": w.entries,
        }
        for w in report.windows
    ]
    if baselines:
        payload["baselines"] = {name: metrics_dict(rep) for name, rep in sorted(baselines.items())}
    if extra:
        payload["run"] = extra
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_windows_csv(path, report: MetricsReport) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("start,rmse,mae,mape_percent,r2,entries\n")
        for w in report.windows:
            f.write(f"{w.start},{_fmt(w.rmse)},{_fmt(w.mae)},{_fmt(w.mape_percent)},{_fmt(w.r2)},{w.entries}\n")


def write_estimates_csv(path, sensor_ids, t0: int, estimates, truth=None, valid=None) -> None:
    """One row per virtual sensor per time step; the truth column is
    empty when no ground truth exists."""
    est = np.asarray(estimates, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as f:
        f.write("sensor_id,t,estimate,truth\n")
        for i, sid in enumerate(sensor_ids):
            for j in range(est.shape[1]):
                known = truth is not None and (valid is None or valid[i, j])
                tcell = _fmt(truth[i, j]) if known else ""
                f.write(f"{sid},{t0 + j},{_fmt(est[i, j])},{tcell}\n")


def write_loss_csv(path, losses) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("iteration,loss\n")
        for i, v in enumerate(losses):
            f.write(f"{i},{_fmt(v)}\n")


def write_validation_csv(path, val_history) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("iteration,rmse\n")
        for i, v in val_history:
            f.write(f"{i},{_fmt(v)}\n")


def svg_line_chart(path, series, title: str = "", width: int = 720, height: int = 360) -> None:
    """Minimal multi-series line chart as standalone SVG markup.

    ``series`` is a list of (label, values) pairs sharing an x axis of
    0..len-1. Pure text output; nothing external renders it.
    """
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    margin = 46
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    ys = np.concatenate([np.asarray(v, dtype=np.float64) for _, v in series]) if series else np.zeros(1)
    lo, hi = float(ys.min()), float(ys.max())
    if hi - lo < 1e-12:
        hi = lo + 1.0
    n = max((len(v) for _, v in series), default=2)

    def sx(i):
        return margin + plot_w * (i / max(n - 1, 1))

    def sy(v):
        return margin + plot_h * (1.0 - (v - lo) / (hi - lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{margin}" y="{margin - 18}" font-size="13" font-family="sans-serif">{title}</text>',
        f'<text x="{margin - 6}" y="{margin + 4}" font-size="10" text-anchor="end" font-family="sans-serif">{hi:.4g}</text>',
        f'<text x="{margin - 6}" y="{height - margin + 4}" font-size="10" text-anchor="end" font-family="sans-serif">{lo:.4g}</text>',
        f'<text x="{width - margin}" y="{height - margin + 14}" font-size="10" text-anchor="end" font-family="sans-serif">t={n - 1}</text>',
    ]
    for s, (label, values) in enumerate(series):
        color = palette[s % len(palette)]
        pts = " ".join(f"{sx(i):.2f},{sy(float(v)):.2f}" for i, v in enumerate(values))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{margin + 8}" y="{margin + 16 + 14 * s}" font-size="11" '
            f'font-family="sans-serif" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(parts) + "\n")
