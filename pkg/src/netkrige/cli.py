"""Command line interface.

Subcommands: ``gen`` (synthetic data), ``train``, ``krige`` (one
window), ``eval`` (sliding-window test metrics), ``transfer`` (eval
with a checkpoint trained elsewhere), ``virtual`` (a line of virtual
sensors between two real ones).

Settings resolve as defaults < config file (``--config``, ``key =
value`` lines) < command line flags, and every run writes its fully
resolved settings next to its outputs. Report-style commands render
matplotlib figures alongside the delimited output; ``eval --svg`` adds
a dependency-free SVG chart of one reconstructed sensor.

Exit codes: 0 success, 2 usage or parameter error, 3 data or file
error, 4 numerical or training failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    Dataset,
    FieldParams,
    SplitSpec,
    build_adjacency,
    gen_synthetic,
    load_csv,
    save_csv,
    split,
)
from .errors import (
    DimensionError,
    GraphCycleError,
    IngestionError,
    NonFiniteError,
    ParameterError,
    TrainingError,
)
from .graph import AdjacencyMatrix
from .kriging import (
    KrigingRequest,
    WindowMetrics,
    knn_baseline,
    krige,
    metrics,
    sliding_krige,
    virtual_line,
)
from .report import (
    svg_line_chart,
    write_estimates_csv,
    write_loss_csv,
    write_metrics_json,
    write_validation_csv,
    write_windows_csv,
)
from .sampler import SamplerConfig
from .trainer import OptimizerConfig, TrainConfig, load_checkpoint, normalize, train
from . import plots

OUTDIR_ENV = "NETKRIGE_OUTDIR"


# ---------------------------------------------------------------------------
# settings resolution


def load_config_file(path) -> dict:
    cfg = {}
    with open(path, "r", encoding="utf-8") as f:
        for i, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise IngestionError(f"expected 'key = value', got {line!r}", line=i)
            key, _, value = line.partition("=")
            cfg[key.strip()] = value.strip()
    return cfg


def _cast_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"cannot read {s!r} as a boolean")


class Resolver:
    """defaults < config file < flags, remembering every resolved value."""

    def __init__(self, args):
        path = getattr(args, "config", None)
        self.file_cfg = load_config_file(path) if path else {}
        self.args = args
        self.resolved: dict = {}

    def get(self, key, default=None, cast=str):
        value = getattr(self.args, key, None)
        if value is None and key in self.file_cfg:
            raw = self.file_cfg[key]
            value = None if raw.lower() in ("", "none") else cast(raw)
        if value is None:
            value = default
        self.resolved[key] = value
        return value

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for key in sorted(self.resolved):
                v = self.resolved[key]
                if v is None:
                    text = "none"
                elif isinstance(v, bool):
                    text = "true" if v else "false"
                elif isinstance(v, float):
                    text = repr(v)
                else:
                    text = str(v)
                f.write(f"{key} = {text}\n")


def _outdir(args) -> Path:
    out = getattr(args, "out", None) or os.environ.get(OUTDIR_ENV) or "."
    p = Path(out)
    if not p.is_dir():
        raise ParameterError(f"output directory {p} does not exist")
    return p


def _load_dataset(args, res: Resolver) -> Dataset:
    signals = res.get("signals")
    geometry = res.get("geometry")
    if not signals or not geometry:
        raise ParameterError("--signals and --geometry are required")
    sentinel = res.get("missing_value")
    return load_csv(signals, geometry, missing_sentinel=sentinel)


def _split_spec(res: Resolver) -> SplitSpec:
    return SplitSpec(
        train_fraction=res.get("train_fraction", 0.7, float),
        unsampled_fraction=res.get("unsampled_fraction", 0.25, float),
        seed=res.get("split_seed", 0, int),
    )


def _adjacency(ds: Dataset, res: Resolver, default_kind=None, default_sigma=None):
    kind = res.get("adjacency", default_kind)
    sigma = res.get("sigma", default_sigma, float)
    threshold = res.get("binary_threshold", "median")
    w, info = build_adjacency(ds, kind=kind, sigma=sigma, threshold=threshold)
    res.resolved["adjacency"] = info["adjacency"]
    res.resolved["sigma"] = info["sigma"]
    res.resolved["binary_threshold"] = info["threshold"]
    return w, info


def _parse_index_list(text: str) -> list:
    if not text or not text.strip():
        return []
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ParameterError(f"expected a comma-separated index list, got {text!r}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    res = Resolver(args)
    out = _outdir(args)
    n = res.get("n", 40, int)
    p = res.get("p", 2000, int)
    seed = res.get("seed", 0, int)
    noise = res.get("noise_std", 0.03, float)
    base = FieldParams()
    fp = FieldParams(
        waves=res.get("waves", base.waves, int),
        amplitude=(
            res.get("amplitude_min", base.amplitude[0], float),
            res.get("amplitude_max", base.amplitude[1], float),
        ),
        frequency=(
            res.get("frequency_min", base.frequency[0], float),
            res.get("frequency_max", base.frequency[1], float),
        ),
        wavenumber=(
            res.get("wavenumber_min", base.wavenumber[0], float),
            res.get("wavenumber_max", base.wavenumber[1], float),
        ),
    )
    ds = gen_synthetic(n, p, field_params=fp, noise_std=noise, seed=seed)
    ds.comments = [
        f"dataset: {ds.name}",
        f"rng: numpy default_rng (PCG64), seed={seed}",
        f"field: waves={fp.waves} amplitude={fp.amplitude} frequency={fp.frequency} "
        f"wavenumber={fp.wavenumber} noise_std={noise}",
    ]
    save_csv(ds, out / "signals.csv", out / "geometry.csv")
    res.write(out / "gen.config.txt")
    print(f"wrote {out / 'signals.csv'} and {out / 'geometry.csv'} ({n} sensors x {p} steps)")
    return 0


def cmd_train(args) -> int:
    res = Resolver(args)
    out = _outdir(args)
    ds = _load_dataset(args, res)
    seed = res.get("seed", 0, int)
    spec = _split_spec(res)
    parts = split(ds, spec)
    w_full, adj_info = _adjacency(ds, res)
    w_train = AdjacencyMatrix(w_full.submatrix(parts.observed), kind=w_full.kind)

    lr = res.get("learning_rate", 1e-3, float)
    if lr == 0:
        print("warning: learning rate is 0, parameters will not change", file=sys.stderr)
    cfg = TrainConfig(
        sampler=SamplerConfig(
            window=res.get("window", 24, int),
            samples_per_iteration=res.get("samples_per_iteration", 4, int),
            max_iterations=res.get("max_iterations", 750, int),
            n_observed=res.get("n_observed", None, int),
            n_masked=res.get("n_masked", None, int),
            seed=seed,
            random_split_sizes=res.get("random_split_sizes", False, _cast_bool),
        ),
        order=res.get("order", 2, int),
        hidden=res.get("hidden", 100, int),
        activation=res.get("activation", "relu"),
        optimizer=OptimizerConfig(
            kind=res.get("optimizer", "adam"),
            learning_rate=lr,
            beta1=res.get("beta1", 0.9, float),
            beta2=res.get("beta2", 0.999, float),
            epsilon=res.get("epsilon", 1e-8, float),
        ),
        validation_fraction=res.get("validation_fraction", 0.0, float),
        validation_interval=res.get("validation_interval", 25, int),
        checkpoint_every=res.get("checkpoint_every", 0, int),
    )
    extra = {
        "dataset": ds.name,
        "observed_indices": [int(i) for i in parts.observed],
        "unsampled_indices": [int(i) for i in parts.unsampled],
        "train_end": parts.train_end,
        "adjacency": adj_info,
        "split": {
            "train_fraction": spec.train_fraction,
            "unsampled_fraction": spec.unsampled_fraction,
            "seed": spec.seed,
        },
    }

    every = max(1, cfg.sampler.max_iterations // 5)

    def progress(it, value):
        if (it + 1) % every == 0 or it == 0:
            print(f"iteration {it + 1}/{cfg.sampler.max_iterations} loss {value:.6g}", file=sys.stderr)

    report = train(
        parts.train,
        w_train,
        cfg,
        seed=seed,
        resume_from=res.get("resume"),
        checkpoint_path=out / "model.ckpt",
        extra_meta=extra,
        progress=progress,
    )
    write_loss_csv(out / "loss_curve.csv", report.losses)
    if report.val_history:
        write_validation_csv(out / "validation.csv", report.val_history)
    plots.save_figure(plots.loss_curve_figure(report.losses, report.val_history), out / "loss_curve.png")
    with open(out / "train_report.json", "w", encoding="utf-8") as f:
        json.dump(
            {
                "iterations": len(report.losses),
                "initial_loss": report.losses[0] if report.losses else None,
                "final_loss": report.losses[-1] if report.losses else None,
                "best_iteration": report.best_iteration,
                "wall_clock_seconds": report.wall_clock_seconds,
                "stats": {"mean": report.stats.mean, "std": report.stats.std},
            },
            f,
            indent=2,
            sort_keys=True,
        )
        f.write("\n")
    res.write(out / "train.config.txt")
    print(f"wrote {out / 'model.ckpt'} (final loss {report.losses[-1]:.6g})" if report.losses else "no iterations run")
    return 0


def _checkpoint_for(args, res: Resolver):
    path = res.get("checkpoint")
    if not path:
        raise ParameterError("--checkpoint is required")
    return load_checkpoint(path)


def cmd_krige(args) -> int:
    res = Resolver(args)
    out = _outdir(args)
    ckpt = _checkpoint_for(args, res)
    params = ckpt.inference_params()
    ds = _load_dataset(args, res)
    start = res.get("start", 0, int)
    virtual = _parse_index_list(res.get("virtual", ""))
    h = params.window
    if start < 0 or start + h > ds.p:
        raise ParameterError(f"window [{start}, {start + h}) does not fit in {ds.p} time steps")
    vset = set(virtual)
    if len(vset) != len(virtual):
        raise ParameterError("virtual indices contain duplicates")
    observed = np.array([i for i in range(ds.n) if i not in vset], dtype=np.intp)
    if observed.size == 0:
        raise ParameterError("at least one sensor must stay observed")
    virtual = np.array(sorted(vset), dtype=np.intp)
    if virtual.size and (virtual[0] < 0 or virtual[-1] >= ds.n):
        raise ParameterError(f"virtual index out of range for {ds.n} sensors")

    ck_kind = ckpt.extra.get("adjacency", {}).get("adjacency")
    w_full, _ = _adjacency(ds, res, default_kind=ck_kind)
    order = np.concatenate([observed, virtual]) if virtual.size else observed
    w_req = w_full.values[np.ix_(order, order)]
    window = slice(start, start + h)
    request = KrigingRequest(
        observed_signals=ds.signals.values[observed, window],
        observed_mask=ds.signals.observed[observed, window].astype(float),
        virtual_count=int(virtual.size),
        adjacency=w_req,
        window_start=start,
    )
    result = krige(params, request, ckpt.stats)
    ids = [ds.sensor_ids[i] for i in virtual]
    truth = ds.signals.values[virtual, window] if virtual.size else None
    valid = ds.signals.observed[virtual, window] if virtual.size else None
    write_estimates_csv(out / "estimates.csv", ids, start, result.virtual_estimates, truth, valid)
    if virtual.size:
        fig = plots.series_overlay_figure(
            np.arange(start, start + h),
            truth[0],
            result.virtual_estimates[0],
            valid=valid[0],
            title=f"kriged sensor {ids[0]}",
        )
        plots.save_figure(fig, out / "estimates.png")
    res.write(out / "krige.config.txt")
    print(f"wrote {out / 'estimates.csv'} ({virtual.size} virtual sensors)")
    return 0


def _run_eval(args, label: str) -> int:
    res = Resolver(args)
    out = _outdir(args)
    ckpt = _checkpoint_for(args, res)
    params = ckpt.inference_params()
    ds = _load_dataset(args, res)
    spec = _split_spec(res)
    parts = split(ds, spec)
    ck_kind = ckpt.extra.get("adjacency", {}).get("adjacency")
    w_full, adj_info = _adjacency(ds, res, default_kind=ck_kind)
    # evaluation always normalizes with the target dataset's training stats
    _, stats = normalize(parts.train)
    window = params.window
    virtual = parts.unsampled
    test = parts.test

    self_test = bool(getattr(args, "self_test", False))
    if self_test:
        span = (test.p // window) * window
        if span == 0:
            raise ParameterError(f"test period of {test.p} steps is shorter than one window ({window})")
        estimates = test.values[virtual, :span].copy()
    else:
        estimates = sliding_krige(params, test, w_full, virtual, window, stats)
    span = estimates.shape[1]
    truth = test.values[virtual, :span]
    valid = test.observed[virtual, :span].astype(float)
    report = metrics(estimates, truth, valid)
    for i in range(span // window):
        cols = slice(i * window, (i + 1) * window)
        try:
            wm = metrics(estimates[:, cols], truth[:, cols], valid[:, cols])
            report.windows.append(
                WindowMetrics(parts.train_end + i * window, wm.rmse, wm.mae, wm.mape_percent, wm.r2, wm.entries)
            )
        except ParameterError:
            report.windows.append(
                WindowMetrics(parts.train_end + i * window, float("nan"), float("nan"), float("nan"), float("nan"), 0)
            )

    baselines = {}
    for spec_text in getattr(args, "baseline", None) or []:
        if spec_text.startswith("knn:"):
            k = int(spec_text.split(":", 1)[1])
            dm = ds.geometry.distance_matrix()
            est_knn = knn_baseline(test, dm, parts.observed, virtual, k)[:, :span]
            baselines[f"knn{k}"] = metrics(est_knn, truth, valid)
        elif spec_text == "mean":
            est_mean = np.full_like(truth, stats.mean)
            baselines["train_mean"] = metrics(est_mean, truth, valid)
        else:
            raise ParameterError(f"unknown baseline {spec_text!r} (use 'knn:K' or 'mean')")

    ids = [ds.sensor_ids[i] for i in virtual]
    run_info = {
        "dataset": ds.name,
        "checkpoint": str(res.resolved.get("checkpoint")),
        "train_end": parts.train_end,
        "window": window,
        "virtual_sensors": ids,
        "adjacency": adj_info,
        "self_test": self_test,
    }
    write_metrics_json(out / "metrics.json", report, baselines=baselines, extra=run_info)
    write_windows_csv(out / "windows.csv", report)
    write_estimates_csv(out / "estimates.csv", ids, parts.train_end, estimates, truth, valid.astype(bool))
    plots.save_figure(plots.window_metrics_figure(report), out / "windows_metrics.png")
    t_axis = np.arange(parts.train_end, parts.train_end + span)
    fig = plots.series_overlay_figure(
        t_axis, truth[0], estimates[0], valid=valid[0], title=f"virtual sensor {ids[0]}"
    )
    plots.save_figure(fig, out / "sensor_overlay.png")
    if getattr(args, "svg", False):
        svg_line_chart(
            out / "chart.svg",
            [("truth", truth[0]), ("estimate", estimates[0])],
            title=f"virtual sensor {ids[0]}",
        )
    res.write(out / f"{label}.config.txt")
    print(
        f"{label}: rmse {report.rmse:.6g} mae {report.mae:.6g} r2 {report.r2:.6g} "
        f"({report.entries} entries, {span // window} windows)"
    )
    return 0


def cmd_eval(args) -> int:
    return _run_eval(args, "eval")


def cmd_transfer(args) -> int:
    return _run_eval(args, "transfer")


def cmd_virtual(args) -> int:
    res = Resolver(args)
    out = _outdir(args)
    ckpt = _checkpoint_for(args, res)
    params = ckpt.inference_params()
    ds = _load_dataset(args, res)
    if ds.geometry.kind != "coords":
        raise ParameterError("virtual sensor placement needs coordinate geometry (distances between new points)")
    endpoints = _parse_index_list(res.get("endpoints", ""))
    if len(endpoints) != 2:
        raise ParameterError("--endpoints must name exactly two sensors, e.g. '0,5'")
    count = res.get("count", 1, int)
    start = res.get("start", 0, int)
    h = params.window
    if start < 0 or start + h > ds.p:
        raise ParameterError(f"window [{start}, {start + h}) does not fit in {ds.p} time steps")
    ck_sigma = ckpt.extra.get("adjacency", {}).get("sigma")
    sigma = res.get("sigma", ck_sigma, float)
    res.resolved["sigma"] = sigma
    window = slice(start, start + h)
    estimates = virtual_line(
        params,
        ds.signals.values[:, window],
        ds.signals.observed[:, window].astype(float),
        ds.geometry.coords,
        (endpoints[0], endpoints[1]),
        count,
        ckpt.stats,
        sigma=sigma,
        metric=ds.geometry.metric,
    )
    ids = [f"virtual{i}" for i in range(count)]
    write_estimates_csv(out / "virtual.csv", ids, start, estimates)
    if count:
        fig = plots.virtual_line_figure(
            estimates,
            endpoint_a=ds.signals.values[endpoints[0], window],
            endpoint_b=ds.signals.values[endpoints[1], window],
            title=f"{count} virtual sensors between {ds.sensor_ids[endpoints[0]]} and {ds.sensor_ids[endpoints[1]]}",
        )
        plots.save_figure(fig, out / "virtual_line.png")
    res.write(out / "virtual.config.txt")
    print(f"wrote {out / 'virtual.csv'} ({count} virtual sensors)")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p):
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--out", help=f"output directory (default ${OUTDIR_ENV} or '.')")
    p.add_argument("--seed", type=int, help="master seed")


def _add_dataset(p):
    p.add_argument("--signals", help="signal CSV path")
    p.add_argument("--geometry", help="geometry CSV path")
    p.add_argument("--missing-value", dest="missing_value", help="sentinel marking missing readings")


def _add_split(p):
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--unsampled-fraction", dest="unsampled_fraction", type=float)
    p.add_argument("--split-seed", dest="split_seed", type=int)


def _add_adjacency(p):
    p.add_argument("--adjacency", choices=["gaussian", "binary"])
    p.add_argument("--sigma", type=float, help="Gaussian kernel width (default: off-diagonal distance std)")
    p.add_argument("--binary-threshold", dest="binary_threshold", help="distance threshold or 'median'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netkrige", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"netkrige {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--n", type=int, help="sensor count")
    p.add_argument("--p", type=int, help="time steps")
    p.add_argument("--noise-std", dest="noise_std", type=float)
    p.add_argument("--waves", type=int)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model on a dataset")
    _add_common(p)
    _add_dataset(p)
    _add_split(p)
    _add_adjacency(p)
    p.add_argument("--window", type=int)
    p.add_argument("--order", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--activation", choices=["relu", "sigmoid", "tanh"])
    p.add_argument("--samples-per-iteration", dest="samples_per_iteration", type=int)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--n-observed", dest="n_observed", type=int)
    p.add_argument("--n-masked", dest="n_masked", type=int)
    p.add_argument("--random-split-sizes", dest="random_split_sizes", action=argparse.BooleanOptionalAction)
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--validation-fraction", dest="validation_fraction", type=float)
    p.add_argument("--validation-interval", dest="validation_interval", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("krige", help="krige chosen sensors over one window")
    _add_common(p)
    _add_dataset(p)
    _add_adjacency(p)
    p.add_argument("--checkpoint", help="trained model checkpoint")
    p.add_argument("--start", type=int, help="window start (0-based column)")
    p.add_argument("--virtual", help="comma-separated sensor indices to treat as virtual")
    p.set_defaults(func=cmd_krige)

    for name, func, extra_help in (
        ("eval", cmd_eval, "evaluate kriging on the dataset's test period"),
        ("transfer", cmd_transfer, "evaluate a checkpoint trained on another dataset"),
    ):
        p = sub.add_parser(name, help=extra_help)
        _add_common(p)
        _add_dataset(p)
        _add_split(p)
        _add_adjacency(p)
        p.add_argument("--checkpoint", help="trained model checkpoint")
        p.add_argument("--baseline", action="append", help="'knn:K' or 'mean'; repeatable")
        p.add_argument("--svg", action="store_true", help="also write a dependency-free SVG chart")
        p.add_argument("--self-test", dest="self_test", action="store_true", help="score truth against itself")
        p.set_defaults(func=func)

    p = sub.add_parser("virtual", help="krige a line of virtual sensors between two real ones")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--checkpoint", help="trained model checkpoint")
    p.add_argument("--endpoints", help="two sensor indices, e.g. '0,5'")
    p.add_argument("--count", type=int, help="number of virtual sensors")
    p.add_argument("--start", type=int, help="window start (0-based column)")
    p.add_argument("--sigma", type=float)
    p.set_defaults(func=cmd_virtual)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, DimensionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (IngestionError, FileNotFoundError, IsADirectoryError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except (NonFiniteError, TrainingError, GraphCycleError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 4


def run() -> None:
    sys.exit(main())
