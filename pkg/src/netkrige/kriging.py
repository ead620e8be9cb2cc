"""Kriging inference and evaluation.

To estimate signals at virtual sensors, stack their (zero) rows under
the observed sensors, build the adjacency over all of them, mask the
virtual rows, and run the trained network: its reconstruction of the
virtual rows is the kriging estimate. Evaluation tiles the test period
with non-overlapping windows and pools the per-entry errors; a kNN
averaging baseline and the usual error metrics live here too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .graph import AdjacencyMatrix, DistanceMatrix, default_sigma, gaussian_adjacency, transitions
from .model import ModelParams, forward
from .sampler import SignalMatrix
from .trainer import NormStats, denormalize

MAPE_EPSILON = 1e-6  # |truth| at or below this is excluded from MAPE


@dataclass
class KrigingRequest:
    """One inference window: observed signals first, virtual rows appended."""

    observed_signals: np.ndarray  # n_s x window
    observed_mask: np.ndarray  # n_s x window, 0 at source-missing entries
    virtual_count: int
    adjacency: object  # (n_s + n_u) square, AdjacencyMatrix or ndarray
    window_start: int = 0

    def adjacency_values(self) -> np.ndarray:
        a = self.adjacency
        return a.values if isinstance(a, AdjacencyMatrix) else np.asarray(a, dtype=np.float64)


@dataclass
class KrigingResult:
    virtual_estimates: np.ndarray  # n_u x window
    observed_reconstruction: np.ndarray  # n_s x window, diagnostic


@dataclass
class WindowMetrics:
    start: int
    rmse: float
    mae: float
    mape_percent: float
    r2: float
    entries: int


@dataclass
class MetricsReport:
    rmse: float
    mae: float
    mape_percent: float
    r2: float
    entries: int
    windows: list


def krige(params: ModelParams, request: KrigingRequest, stats: NormStats) -> KrigingResult:
    """Reconstruct all rows of one window; split off the virtual estimates."""
    y = np.ascontiguousarray(request.observed_signals, dtype=np.float64)
    mask = np.ascontiguousarray(request.observed_mask, dtype=np.float64)
    if y.ndim != 2:
        raise DimensionError(f"observed signals must be 2-D, got shape {y.shape}")
    if mask.shape != y.shape:
        raise DimensionError(f"mask shape {mask.shape} != signal shape {y.shape}")
    n_s, h = y.shape
    n_u = int(request.virtual_count)
    if n_u < 0:
        raise ParameterError(f"virtual_count must be nonnegative, got {n_u}")
    if h != params.window:
        raise ParameterError(f"window length {h} does not match trained window {params.window}")
    w = request.adjacency_values()
    if w.shape != (n_s + n_u, n_s + n_u):
        raise ParameterError(
            f"adjacency shape {w.shape} must be ({n_s + n_u}, {n_s + n_u}): observed rows first"
        )

    normalized = (y - stats.mean) / stats.std * mask
    x_input = np.vstack([normalized, np.zeros((n_u, h))])
    rec = forward(params, x_input, transitions(w)).reconstruction
    rec = denormalize(rec, stats)
    return KrigingResult(virtual_estimates=rec[n_s:], observed_reconstruction=rec[:n_s])


def _reordered_adjacency(w_full, observed: np.ndarray, virtual: np.ndarray) -> np.ndarray:
    values = w_full.values if isinstance(w_full, AdjacencyMatrix) else np.asarray(w_full, dtype=np.float64)
    order = np.concatenate([observed, virtual])
    return values[np.ix_(order, order)]


def _split_indices(n: int, virtual_indices) -> tuple[np.ndarray, np.ndarray]:
    virtual = np.asarray(sorted(int(i) for i in virtual_indices), dtype=np.intp)
    if virtual.size and (virtual[0] < 0 or virtual[-1] >= n):
        raise ParameterError(f"virtual index out of range for {n} sensors")
    if np.unique(virtual).size != virtual.size:
        raise ParameterError("virtual indices contain duplicates")
    observed = np.setdiff1d(np.arange(n), virtual)
    if observed.size == 0:
        raise ParameterError("at least one observed sensor is required")
    return observed, virtual


def sliding_krige(
    params: ModelParams,
    signals: SignalMatrix,
    w_full,
    virtual_indices,
    window: int,
    stats: NormStats,
) -> np.ndarray:
    """Krige consecutive non-overlapping windows; the trailing partial
    window is dropped. Returns n_u x (n_windows * window) estimates."""
    observed, virtual = _split_indices(signals.n, virtual_indices)
    if signals.p < window:
        raise ParameterError(f"period of {signals.p} steps is shorter than one window ({window})")
    n_windows = signals.p // window
    w_req = _reordered_adjacency(w_full, observed, virtual)
    parts = []
    for i in range(n_windows):
        cols = slice(i * window, (i + 1) * window)
        request = KrigingRequest(
            observed_signals=signals.values[observed, cols],
            observed_mask=signals.observed[observed, cols].astype(np.float64),
            virtual_count=len(virtual),
            adjacency=w_req,
            window_start=i * window,
        )
        parts.append(krige(params, request, stats).virtual_estimates)
    if not parts:
        return np.zeros((len(virtual), 0))
    return np.hstack(parts)


def sliding_eval(
    params: ModelParams,
    signals: SignalMatrix,
    w_full,
    virtual_indices,
    window: int,
    stats: NormStats,
    t0: int = 0,
) -> MetricsReport:
    """Score sliding-window kriging against ground truth at the virtual
    sensors. Entries whose truth is source-missing are excluded. ``t0``
    only labels the per-window breakdown."""
    observed, virtual = _split_indices(signals.n, virtual_indices)
    estimates = sliding_krige(params, signals, w_full, virtual_indices, window, stats)
    span = estimates.shape[1]
    truth = signals.values[virtual, :span]
    valid = signals.observed[virtual, :span].astype(np.float64)
    report = metrics(estimates, truth, valid)
    for i in range(span // window):
        cols = slice(i * window, (i + 1) * window)
        try:
            wm = metrics(estimates[:, cols], truth[:, cols], valid[:, cols])
            report.windows.append(
                WindowMetrics(t0 + i * window, wm.rmse, wm.mae, wm.mape_percent, wm.r2, wm.entries)
            )
        except ParameterError:
            report.windows.append(
                WindowMetrics(t0 + i * window, float("nan"), float("nan"), float("nan"), float("nan"), 0)
            )
    return report


def metrics(estimates, truth, valid_mask) -> MetricsReport:
    """RMSE, MAE, MAPE (percent) and R2 over entries with valid truth.

    R2 is 1 - SSE/SST with SST taken about the mean of the valid truth
    entries; it is not clamped and goes negative whenever the estimates
    do worse than that mean. Constant truth (SST = 0) yields R2 = 1 for
    a perfect fit and NaN otherwise. MAPE skips entries with
    |truth| <= 1e-6.
    """
    est = np.asarray(estimates, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape:
        raise DimensionError(f"estimate shape {est.shape} != truth shape {tru.shape}")
    keep = np.asarray(valid_mask, dtype=np.float64) != 0
    if keep.shape != est.shape:
        raise DimensionError(f"valid mask shape {keep.shape} != estimate shape {est.shape}")
    if not keep.any():
        raise ParameterError("no valid entries to score")
    e = est[keep] - tru[keep]
    t = tru[keep]
    rmse = float(np.sqrt(np.mean(e * e)))
    mae = float(np.mean(np.abs(e)))
    nonzero = np.abs(t) > MAPE_EPSILON
    mape = float(np.mean(np.abs(e[nonzero] / t[nonzero])) * 100.0) if nonzero.any() else float("nan")
    sse = float(np.sum(e * e))
    sst = float(np.sum((t - t.mean()) ** 2))
    if sst > 0:
        r2 = 1.0 - sse / sst
    else:
        r2 = 1.0 if sse == 0 else float("nan")
    return MetricsReport(rmse=rmse, mae=mae, mape_percent=mape, r2=r2, entries=int(keep.sum()), windows=[])


def knn_baseline(
    signals: SignalMatrix,
    distances: DistanceMatrix,
    observed_indices,
    virtual_indices,
    k: int,
) -> np.ndarray:
    """Per virtual sensor, the unweighted mean of its k nearest observed
    sensors' signals at each time step. Missing entries drop out of the
    mean; if every neighbor is missing at a step the estimate is 0.
    With fewer than k observed sensors, all of them are used."""
    if k < 1:
        raise ParameterError(f"k must be at least 1, got {k}")
    observed = np.asarray(observed_indices, dtype=np.intp)
    virtual = np.asarray(virtual_indices, dtype=np.intp)
    k = min(k, observed.size)
    d = distances.values[np.ix_(virtual, observed)]
    estimates = np.zeros((virtual.size, signals.p))
    for row in range(virtual.size):
        nearest = observed[np.argsort(d[row], kind="stable")[:k]]
        vals = signals.values[nearest]
        mask = signals.observed[nearest].astype(np.float64)
        counts = mask.sum(axis=0)
        sums = (vals * mask).sum(axis=0)
        estimates[row] = np.divide(sums, counts, out=np.zeros(signals.p), where=counts > 0)
    return estimates


def virtual_line(
    params: ModelParams,
    observed_signals: np.ndarray,
    observed_mask: np.ndarray,
    coords: np.ndarray,
    endpoints: tuple[int, int],
    count: int,
    stats: NormStats,
    sigma: float | None = None,
    metric: str = "euclidean",
    spacing: str = "interior",
) -> np.ndarray:
    """Krige ``count`` virtual sensors placed along the segment between
    two existing sensors.

    ``interior`` spacing puts them at fractions i/(count+1) of the way
    from endpoint a to endpoint b; ``inclusive`` spans the endpoints
    themselves (count >= 2). Builds the augmented Gaussian-kernel
    adjacency from coordinates, so distance-free (binary) geometries
    cannot use this. Returns count x window estimates ordered from a
    to b."""
    coords = np.asarray(coords, dtype=np.float64)
    n_s = coords.shape[0]
    a, b = int(endpoints[0]), int(endpoints[1])
    if not (0 <= a < n_s and 0 <= b < n_s):
        raise ParameterError(f"endpoint indices ({a}, {b}) out of range for {n_s} sensors")
    if a == b:
        raise ParameterError("endpoints must be two distinct sensors")
    if count < 0:
        raise ParameterError(f"count must be nonnegative, got {count}")
    if count == 0:
        return np.zeros((0, params.window))
    if spacing == "interior":
        fractions = np.arange(1, count + 1) / (count + 1)
    elif spacing == "inclusive":
        if count < 2:
            raise ParameterError("inclusive spacing needs count >= 2")
        fractions = np.arange(count) / (count - 1)
    else:
        raise ParameterError(f"unknown spacing rule {spacing!r}")
    virtual_coords = coords[a] + fractions[:, None] * (coords[b] - coords[a])
    dm = DistanceMatrix.from_coordinates(np.vstack([coords, virtual_coords]), metric=metric)
    w = gaussian_adjacency(dm, sigma if sigma is not None else default_sigma(dm))
    request = KrigingRequest(
        observed_signals=observed_signals,
        observed_mask=np.asarray(observed_mask, dtype=np.float64),
        virtual_count=count,
        adjacency=w,
    )
    return krige(params, request, stats).virtual_estimates
