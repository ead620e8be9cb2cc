"""Shared fixtures and independent oracle helpers.

The oracles here (naive matmul, finite differences, loop-based metrics)
deliberately avoid the library's own code paths so the tests check
against genuinely independent computations.
"""

import numpy as np
import pytest

from netkrige import (
    AdjacencyMatrix,
    SamplerConfig,
    SplitSpec,
    TrainConfig,
    FieldParams,
    build_adjacency,
    gen_synthetic,
    split,
    train,
)


def naive_matmul(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            s = 0.0
            for k in range(a.shape[1]):
                s += a[i, k] * b[k, j]
            out[i, j] = s
    return out


def central_diff(f, x, step=1e-5):
    """Gradient of scalar f at matrix x by central differences."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + step
        hi = f()
        x[idx] = old - step
        lo = f()
        x[idx] = old
        g[idx] = (hi - lo) / (2 * step)
    return g


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


def naive_metrics(est, truth, valid):
    """Loop-based reimplementation of RMSE/MAE/MAPE/R2, used only here."""
    errs, abss, mapes, vals = [], [], [], []
    est = np.asarray(est)
    truth = np.asarray(truth)
    valid = np.asarray(valid)
    for i in range(est.shape[0]):
        for j in range(est.shape[1]):
            if valid[i, j]:
                e = est[i, j] - truth[i, j]
                errs.append(e * e)
                abss.append(abs(e))
                vals.append(truth[i, j])
                if abs(truth[i, j]) > 1e-6:
                    mapes.append(abs(e / truth[i, j]))
    rmse = (sum(errs) / len(errs)) ** 0.5
    mae = sum(abss) / len(abss)
    mape = 100.0 * sum(mapes) / len(mapes) if mapes else float("nan")
    mean = sum(vals) / len(vals)
    sst = sum((v - mean) ** 2 for v in vals)
    sse = sum(errs)
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else float("nan"))
    return rmse, mae, mape, r2


SMOOTH_FIELD = FieldParams(waves=3, wavenumber=(1.5, 3.0))


@pytest.fixture(scope="session")
def smooth_case():
    """A small trained model on a smooth, low-noise field.

    Shared by kriging and trainer tests that need a model which has
    actually learned spatial interpolation.
    """
    ds = gen_synthetic(24, 600, field_params=SMOOTH_FIELD, noise_std=0.02, seed=11)
    parts = split(ds, SplitSpec(seed=2))
    w_full, info = build_adjacency(ds)
    w_train = AdjacencyMatrix(w_full.submatrix(parts.observed), kind=w_full.kind)
    cfg = TrainConfig(
        sampler=SamplerConfig(window=12, max_iterations=400),
        order=2,
        hidden=24,
    )
    report = train(parts.train, w_train, cfg, seed=3)
    return {
        "dataset": ds,
        "parts": parts,
        "w_full": w_full,
        "sigma": info["sigma"],
        "report": report,
        "window": 12,
    }
