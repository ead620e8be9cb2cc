"""Random subgraph training samples.

Each draw picks ``n_observed + n_masked`` sensors without replacement
and a random window of ``window`` consecutive time steps, then emits the
signal submatrix, a mask that hides the masked rows (and any
source-missing entries), and the induced adjacency submatrix. Training
on many such draws teaches the model a message passing rule that
transfers to sensors and graphs it never saw.

All randomness flows through a caller-supplied ``numpy.random.Generator``
(PCG64 via ``numpy.random.default_rng``), so a seed fixes every sample.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, NonFiniteError, ParameterError
from .graph import AdjacencyMatrix


@dataclass
class SignalMatrix:
    """n sensors by p time steps, with explicit missingness flags.

    Missing entries (``observed`` false) must still hold finite values;
    loaders store 0.0 there. Downstream code never reads them except
    through a mask.
    """

    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        o = np.ascontiguousarray(self.observed, dtype=bool)
        if v.ndim != 2:
            raise DimensionError(f"signal values must be 2-D, got shape {v.shape}")
        if o.shape != v.shape:
            raise DimensionError(f"observed flags shape {o.shape} != values shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteError("signal values contain NaN or Inf (store 0.0 at missing entries)")
        self.values = v
        self.observed = o

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def slice_time(self, start: int, stop: int) -> "SignalMatrix":
        return SignalMatrix(self.values[:, start:stop].copy(), self.observed[:, start:stop].copy())

    def take_rows(self, indices) -> "SignalMatrix":
        idx = np.asarray(indices, dtype=np.intp)
        return SignalMatrix(self.values[idx].copy(), self.observed[idx].copy())


@dataclass
class SamplerConfig:
    """Knobs for subgraph sampling.

    ``n_observed`` / ``n_masked`` left as None are resolved against the
    signal matrix: 75% of the sensors (rounded) stay observed, the rest
    are masked, so each sample covers the whole training graph.
    ``random_split_sizes`` instead draws the two counts per sample,
    uniformly with ``n_observed + n_masked <= n``.
    """

    window: int = 24
    samples_per_iteration: int = 4
    max_iterations: int = 750
    n_observed: int | None = None
    n_masked: int | None = None
    seed: int = 0
    random_split_sizes: bool = False

    def resolved(self, n: int) -> "SamplerConfig":
        """Fill derived fields and validate against a sensor count."""
        n_obs, n_mask = self.n_observed, self.n_masked
        if n_obs is None and n_mask is None:
            n_obs = min(max(int(0.75 * n + 0.5), 1), n - 1)
            n_mask = n - n_obs
        elif n_obs is None:
            n_obs = n - int(n_mask)
        elif n_mask is None:
            n_mask = n - int(n_obs)
        cfg = replace(self, n_observed=int(n_obs), n_masked=int(n_mask))
        if cfg.window < 1:
            raise ParameterError(f"window must be at least 1, got {cfg.window}")
        if cfg.samples_per_iteration < 1:
            raise ParameterError(f"samples_per_iteration must be at least 1, got {cfg.samples_per_iteration}")
        if cfg.max_iterations < 0:
            raise ParameterError(f"max_iterations must be nonnegative, got {cfg.max_iterations}")
        if cfg.n_observed < 1 or cfg.n_masked < 1:
            raise ParameterError("n_observed and n_masked must both be at least 1")
        if cfg.n_observed + cfg.n_masked > n:
            raise ParameterError(
                f"n_observed + n_masked = {cfg.n_observed + cfg.n_masked} exceeds sensor count {n}"
            )
        return cfg


@dataclass
class SubgraphSample:
    """One training instance.

    ``mask`` is 1 where the model may see the input (observed rows at
    source-observed entries) and 0 elsewhere. ``valid`` flags entries
    with trustworthy ground truth: masked rows are valid wherever the
    source was observed, so they count toward the reconstruction loss.
    ``window_start`` is the 0-based first column of the window.
    """

    signals: np.ndarray
    mask: np.ndarray
    valid: np.ndarray
    adjacency: np.ndarray
    node_indices: np.ndarray
    window_start: int
    n_observed: int
    n_masked: int


def _adjacency_values(w_full) -> np.ndarray:
    return w_full.values if isinstance(w_full, AdjacencyMatrix) else np.ascontiguousarray(w_full, dtype=np.float64)


def draw_sample(
    signals: SignalMatrix,
    w_full,
    cfg: SamplerConfig,
    rng: np.random.Generator,
) -> SubgraphSample:
    """Draw one subgraph sample: nodes, window, mask, adjacency submatrix."""
    n, p = signals.n, signals.p
    w = _adjacency_values(w_full)
    if w.shape != (n, n):
        raise ParameterError(f"adjacency shape {w.shape} does not match sensor count {n}")
    cfg = cfg.resolved(n)
    if p <= cfg.window:
        raise ParameterError(f"need more than window={cfg.window} time steps, got p={p}")

    if cfg.random_split_sizes:
        n_obs = int(rng.integers(1, n))
        n_mask = int(rng.integers(1, n - n_obs + 1))
    else:
        n_obs, n_mask = cfg.n_observed, cfg.n_masked

    idx = rng.choice(n, size=n_obs + n_mask, replace=False)
    start = int(rng.integers(0, p - cfg.window))

    window = slice(start, start + cfg.window)
    x = signals.values[idx, window].copy()
    obs = signals.observed[idx, window]
    mask = np.zeros_like(x)
    mask[:n_obs] = obs[:n_obs]
    return SubgraphSample(
        signals=x,
        mask=mask,
        valid=obs.astype(np.float64),
        adjacency=w[np.ix_(idx, idx)],
        node_indices=idx,
        window_start=start,
        n_observed=n_obs,
        n_masked=n_mask,
    )


def draw_batch(
    signals: SignalMatrix,
    w_full,
    cfg: SamplerConfig,
    rng: np.random.Generator,
) -> list[SubgraphSample]:
    """Draw ``samples_per_iteration`` independent samples, in draw order."""
    cfg = cfg.resolved(signals.n)
    return [draw_sample(signals, w_full, cfg, rng) for _ in range(cfg.samples_per_iteration)]
