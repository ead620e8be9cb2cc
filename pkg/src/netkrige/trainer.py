"""Training loop: masked reconstruction loss, Adam/SGD, checkpoints.

Each iteration draws a batch of subgraph samples, sums the masked
squared reconstruction error over the batch, backpropagates, and takes
one optimizer step. Signals are z-scored over the observed entries
before training; the same stats denormalize predictions later.

Everything that influences the run flows from one seed (weight init,
sampling, validation node choice), and checkpoints capture optimizer
and sampler RNG state, so an interrupted run resumed from its
checkpoint is byte-identical to an uninterrupted one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import NonFiniteError, ParameterError, TrainingError
from .graph import AdjacencyMatrix, transitions
from .model import ModelParams, _params_from_matrices, forward, init_params, wrap_weights
from .sampler import SamplerConfig, SignalMatrix, draw_batch
from .storage import read_container, write_container


@dataclass
class NormStats:
    """z-score normalization constants, computed on training data only."""

    mean: float
    std: float


def normalize(signals: SignalMatrix) -> tuple[SignalMatrix, NormStats]:
    """z-score over observed entries; missing entries become 0."""
    if not signals.observed.any():
        raise ParameterError("cannot normalize a signal matrix with no observed entries")
    obs = signals.values[signals.observed]
    stats = NormStats(mean=float(obs.mean()), std=float(obs.std()))
    if not stats.std > 0:
        raise ParameterError("signal has zero variance over observed entries")
    return apply_stats(signals, stats), stats


def apply_stats(signals: SignalMatrix, stats: NormStats) -> SignalMatrix:
    values = np.where(signals.observed, (signals.values - stats.mean) / stats.std, 0.0)
    return SignalMatrix(values, signals.observed.copy())


def denormalize(values: np.ndarray, stats: NormStats) -> np.ndarray:
    return np.asarray(values) * stats.std + stats.mean


def loss(x_hat, x_true, valid_mask):
    """Sum of squared errors over entries where ``valid_mask`` is 1.

    Masked-row entries are included whenever their ground truth exists;
    the mask excludes only source-missing truth. Returns a float for
    plain arrays, a 1x1 Tensor when ``x_hat`` is a Tensor.
    """
    masked = ad.hadamard(ad.sub(x_hat, x_true), valid_mask)
    total = ad.frobenius_sq(masked)
    if isinstance(total, ad.Tensor):
        return total
    return float(total[0, 0])


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ParameterError(f"unknown optimizer {self.kind!r}")
        if self.learning_rate < 0:
            raise ParameterError(f"learning rate must be nonnegative, got {self.learning_rate}")


class Adam:
    """Adam with bias correction; per-step size is bounded by the lr."""

    def __init__(self, shapes, cfg: OptimizerConfig):
        self.cfg = cfg
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.steps = 0

    def step(self, weights, grads) -> None:
        c = self.cfg
        self.steps += 1
        for i, (w, g) in enumerate(zip(weights, grads)):
            self.m[i] = c.beta1 * self.m[i] + (1 - c.beta1) * g
            self.v[i] = c.beta2 * self.v[i] + (1 - c.beta2) * (g * g)
            m_hat = self.m[i] / (1 - c.beta1 ** self.steps)
            v_hat = self.v[i] / (1 - c.beta2 ** self.steps)
            w -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.epsilon)


class Sgd:
    def __init__(self, shapes, cfg: OptimizerConfig):
        self.cfg = cfg
        self.steps = 0

    def step(self, weights, grads) -> None:
        self.steps += 1
        for w, g in zip(weights, grads):
            w -= self.cfg.learning_rate * g


def make_optimizer(cfg: OptimizerConfig, params: ModelParams):
    shapes = [m.shape for m in params.weight_arrays()]
    return Adam(shapes, cfg) if cfg.kind == "adam" else Sgd(shapes, cfg)


@dataclass
class TrainConfig:
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    order: int = 2
    hidden: int = 100
    activation: str = "relu"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    stats: NormStats | None = None  # None: computed from the training signals
    validation_fraction: float = 0.0  # fraction of training windows held out
    validation_interval: int = 25
    checkpoint_every: int = 0  # 0: only write a final checkpoint


@dataclass
class TrainReport:
    losses: list
    val_history: list  # (iteration, rmse) pairs, normalized space
    best_iteration: int | None
    wall_clock_seconds: float
    params: ModelParams  # best-validation params if validation ran, else final
    stats: NormStats


@dataclass
class Checkpoint:
    params: ModelParams
    best_params: ModelParams | None
    iteration: int
    losses: list
    val_history: list
    best_iteration: int | None
    best_val_rmse: float | None
    optimizer_state: dict
    rng_state: dict
    stats: NormStats
    extra: dict

    def inference_params(self) -> ModelParams:
        return self.best_params if self.best_params is not None else self.params


def save_checkpoint(
    path,
    params: ModelParams,
    optimizer,
    rng_state: dict,
    iteration: int,
    losses: list,
    stats: NormStats,
    val_history: list | None = None,
    best_params: ModelParams | None = None,
    best_iteration: int | None = None,
    best_val_rmse: float | None = None,
    extra: dict | None = None,
) -> None:
    opt_cfg = optimizer.cfg
    meta = {
        "kind": "checkpoint",
        "order": params.order,
        "window": params.window,
        "hidden": params.hidden,
        "activation": params.activation,
        "iteration": iteration,
        "losses": losses,
        "val_history": val_history or [],
        "best_iteration": best_iteration,
        "best_val_rmse": best_val_rmse,
        "has_best": best_params is not None,
        "optimizer": {
            "kind": opt_cfg.kind,
            "learning_rate": opt_cfg.learning_rate,
            "beta1": opt_cfg.beta1,
            "beta2": opt_cfg.beta2,
            "epsilon": opt_cfg.epsilon,
            "steps": optimizer.steps,
        },
        "rng_state": rng_state,
        "stats": {"mean": stats.mean, "std": stats.std},
        "extra": extra or {},
    }
    matrices = list(params.named_weights())
    if isinstance(optimizer, Adam):
        names = [n for n, _ in params.named_weights()]
        matrices += [(f"opt.m.{n}", m) for n, m in zip(names, optimizer.m)]
        matrices += [(f"opt.v.{n}", v) for n, v in zip(names, optimizer.v)]
    if best_params is not None:
        matrices += [(f"best.{n}", m) for n, m in best_params.named_weights()]
    write_container(path, meta, matrices)


def load_checkpoint(path) -> Checkpoint:
    meta, matrices = read_container(path)
    if meta.get("kind") != "checkpoint":
        raise ParameterError(f"{path}: not a checkpoint container")
    params = _params_from_matrices(meta, matrices)
    best = _params_from_matrices(meta, matrices, prefix="best.") if meta.get("has_best") else None
    stats = NormStats(**meta["stats"])
    opt_meta = dict(meta["optimizer"])
    names = [n for n, _ in params.named_weights()]
    if opt_meta["kind"] == "adam":
        opt_meta["m"] = [matrices[f"opt.m.{n}"] for n in names]
        opt_meta["v"] = [matrices[f"opt.v.{n}"] for n in names]
    return Checkpoint(
        params=params,
        best_params=best,
        iteration=int(meta["iteration"]),
        losses=list(meta["losses"]),
        val_history=[tuple(x) for x in meta["val_history"]],
        best_iteration=meta["best_iteration"],
        best_val_rmse=meta["best_val_rmse"],
        optimizer_state=opt_meta,
        rng_state=meta["rng_state"],
        stats=stats,
        extra=meta.get("extra", {}),
    )


def _restore_optimizer(state: dict, params: ModelParams):
    cfg = OptimizerConfig(
        kind=state["kind"],
        learning_rate=state["learning_rate"],
        beta1=state["beta1"],
        beta2=state["beta2"],
        epsilon=state["epsilon"],
    )
    opt = make_optimizer(cfg, params)
    opt.steps = int(state["steps"])
    if isinstance(opt, Adam):
        opt.m = [m.copy() for m in state["m"]]
        opt.v = [v.copy() for v in state["v"]]
    return opt


def _validation_rmse(params, trans_full, normalized, val_start, n_windows, val_nodes, window):
    """Pooled RMSE on pseudo-masked nodes over the held-out windows."""
    sq_sum = 0.0
    count = 0
    for w in range(n_windows):
        cols = slice(val_start + w * window, val_start + (w + 1) * window)
        values = normalized.values[:, cols]
        obs = normalized.observed[:, cols]
        mask = obs.astype(np.float64)
        mask[val_nodes] = 0.0
        rec = forward(params, values * mask, trans_full).reconstruction
        err = (rec - values)[val_nodes]
        keep = obs[val_nodes]
        sq_sum += float((err[keep] ** 2).sum())
        count += int(keep.sum())
    return float(np.sqrt(sq_sum / count)) if count else float("nan")


def train(
    signals: SignalMatrix,
    w_full,
    cfg: TrainConfig,
    seed: int = 0,
    resume_from=None,
    checkpoint_path=None,
    extra_meta: dict | None = None,
    progress=None,
) -> TrainReport:
    """Run the sampling/reconstruction loop for ``max_iterations`` steps.

    ``signals`` must already be restricted to the training period and to
    observed sensors; nothing outside it is ever read. ``seed`` is the
    master seed for init, sampling and validation (the sampler config's
    own seed field applies only to standalone sampler use). Loss values
    are recorded before each step. Raises TrainingError with the
    iteration index if the loss goes non-finite.
    """
    t0 = time.perf_counter()
    w = w_full if isinstance(w_full, AdjacencyMatrix) else AdjacencyMatrix(w_full, kind="gaussian")
    if w.n != signals.n:
        raise ParameterError(f"adjacency has {w.n} nodes but signals have {signals.n} rows")
    scfg = cfg.sampler.resolved(signals.n)

    init_ss, samp_ss, val_ss = np.random.SeedSequence(seed).spawn(3)

    resumed = None
    if resume_from is not None:
        resumed = resume_from if isinstance(resume_from, Checkpoint) else load_checkpoint(resume_from)
        for name, want in (("order", cfg.order), ("hidden", cfg.hidden)):
            have = getattr(resumed.params, name)
            if have != want:
                raise ParameterError(f"checkpoint {name}={have} does not match config {name}={want}")
        if resumed.params.window != scfg.window:
            raise ParameterError(
                f"checkpoint window={resumed.params.window} does not match config window={scfg.window}"
            )
        stats = resumed.stats
        normalized = apply_stats(signals, stats)
    elif cfg.stats is not None:
        stats = cfg.stats
        normalized = apply_stats(signals, stats)
    else:
        normalized, stats = normalize(signals)

    # validation carve-out: the last windows of the training period are
    # scored on pseudo-masked nodes and never sampled from
    val_nodes = None
    val_start = n_val_windows = 0
    trans_full = None
    if cfg.validation_fraction > 0:
        if not 0 < cfg.validation_fraction < 1:
            raise ParameterError("validation_fraction must lie in (0, 1)")
        total_windows = normalized.p // scfg.window
        n_val_windows = max(1, int(round(cfg.validation_fraction * total_windows)))
        val_start = normalized.p - n_val_windows * scfg.window
        if val_start <= scfg.window:
            raise ParameterError("validation carve-out leaves too little data to sample from")
        val_rng = np.random.default_rng(val_ss)
        n_pseudo = min(scfg.n_masked, signals.n - 1)
        val_nodes = np.sort(val_rng.choice(signals.n, size=n_pseudo, replace=False))
        trans_full = transitions(w)
        fit_signals = normalized.slice_time(0, val_start)
    else:
        fit_signals = normalized

    if resumed is not None:
        params = resumed.params
        opt = _restore_optimizer(resumed.optimizer_state, params)
        samp_rng = np.random.default_rng()
        samp_rng.bit_generator.state = resumed.rng_state
        losses = list(resumed.losses)
        val_history = list(resumed.val_history)
        best_params = resumed.best_params
        best_iteration = resumed.best_iteration
        best_val_rmse = resumed.best_val_rmse
        start = resumed.iteration
    else:
        params = init_params(cfg.order, scfg.window, cfg.hidden, seed=init_ss, activation=cfg.activation)
        opt = make_optimizer(cfg.optimizer, params)
        samp_rng = np.random.default_rng(samp_ss)
        losses = []
        val_history = []
        best_params = None
        best_iteration = None
        best_val_rmse = None
        start = 0

    weight_arrays = params.weight_arrays()
    for it in range(start, scfg.max_iterations):
        try:
            batch = draw_batch(fit_signals, w, scfg, samp_rng)
            banks, flat = wrap_weights(params)
            total = None
            for s in batch:
                res = forward(params, s.signals * s.mask, transitions(s.adjacency), weights=banks)
                term = loss(res.reconstruction, s.signals, s.valid)
                total = term if total is None else ad.add(total, term)
            value = float(total.value[0, 0])
            losses.append(value)
            ad.backward(total)
            grads = [t.grad for t in flat]
            opt.step(weight_arrays, grads)
        except NonFiniteError as e:
            raise TrainingError(f"training diverged: {e}", iteration=it) from e

        if val_nodes is not None and ((it + 1) % cfg.validation_interval == 0 or it + 1 == scfg.max_iterations):
            rmse = _validation_rmse(params, trans_full, normalized, val_start, n_val_windows, val_nodes, scfg.window)
            val_history.append((it, rmse))
            if np.isfinite(rmse) and (best_val_rmse is None or rmse < best_val_rmse):
                best_val_rmse = rmse
                best_iteration = it
                best_params = params.copy()

        if progress is not None:
            progress(it, losses[-1])
        if checkpoint_path is not None and cfg.checkpoint_every > 0 and (it + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(
                checkpoint_path, params, opt, samp_rng.bit_generator.state, it + 1, losses, stats,
                val_history, best_params, best_iteration, best_val_rmse, extra_meta,
            )

    if checkpoint_path is not None:
        save_checkpoint(
            checkpoint_path, params, opt, samp_rng.bit_generator.state, scfg.max_iterations, losses, stats,
            val_history, best_params, best_iteration, best_val_rmse, extra_meta,
        )

    selected = best_params if best_params is not None else params
    return TrainReport(
        losses=losses,
        val_history=val_history,
        best_iteration=best_iteration,
        wall_clock_seconds=time.perf_counter() - t0,
        params=selected,
        stats=stats,
    )
