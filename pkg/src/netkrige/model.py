"""Three-layer diffusion graph convolution network.

One layer computes

    H_next = sum_{k=1..K}  T_k(Wf) @ H @ F_k  +  T_k(Wb) @ H @ B_k

where ``T_k`` are Chebyshev terms of the forward/backward transition
matrices and ``F_k`` / ``B_k`` are the layer's two weight banks. The
full network maps a masked signal window back to a reconstruction of
every row:

    H1    = layer0(X_masked)                 window -> hidden
    H2    = act(layer1(H1)) + H1             hidden -> hidden, residual
    X_hat = layer2(H2)                       hidden -> window, no act

The residual keeps the first layer's view of which rows carried data.
Weights touch only the window and hidden dimensions, so one trained
parameter set runs on subgraphs of any node count, including graphs
never seen in training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import autodiff as ad
from .errors import DimensionError, ParameterError
from .graph import TransitionPair, chebyshev
from .storage import read_container, write_container

ACTIVATIONS = ("relu", "sigmoid", "tanh")


@dataclass
class LayerBank:
    """Per-layer weights: one matrix per Chebyshev order and direction."""

    forward: list  # rides T_k of the forward transition matrix
    backward: list  # rides T_k of the backward transition matrix


@dataclass
class ModelParams:
    """All weights plus the hyperparameters that fix their shapes."""

    order: int  # Chebyshev / diffusion order K
    window: int  # time steps per sample
    hidden: int  # width of the two inner representations
    activation: str
    layers: list  # three LayerBank entries

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        expected = self.layer_shapes(self.window, self.hidden)
        if len(self.layers) != 3:
            raise ParameterError(f"expected 3 layers, got {len(self.layers)}")
        for l, bank in enumerate(self.layers):
            for side in (bank.forward, bank.backward):
                if len(side) != self.order:
                    raise ParameterError(f"layer {l} needs {self.order} matrices per direction")
                for m in side:
                    if m.shape != expected[l]:
                        raise DimensionError(
                            f"layer {l} weight shape {m.shape}, expected {expected[l]}"
                        )

    @staticmethod
    def layer_shapes(window: int, hidden: int) -> list[tuple[int, int]]:
        return [(window, hidden), (hidden, hidden), (hidden, window)]

    def named_weights(self) -> Iterator[tuple[str, np.ndarray]]:
        """Deterministic (name, matrix) order used by optimizer and files."""
        for l, bank in enumerate(self.layers):
            for k, m in enumerate(bank.forward):
                yield f"layer{l}.fwd.k{k + 1}", m
            for k, m in enumerate(bank.backward):
                yield f"layer{l}.bwd.k{k + 1}", m

    def weight_arrays(self) -> list[np.ndarray]:
        return [m for _, m in self.named_weights()]

    def copy(self) -> "ModelParams":
        layers = [
            LayerBank([m.copy() for m in b.forward], [m.copy() for m in b.backward])
            for b in self.layers
        ]
        return ModelParams(self.order, self.window, self.hidden, self.activation, layers)


def init_params(order: int, window: int, hidden: int, seed=0, activation: str = "relu") -> ModelParams:
    """Glorot-uniform weights, deterministic for a given seed.

    Each matrix is drawn uniform in +-sqrt(6 / (fan_in + fan_out)).
    ``seed`` may be an int, a SeedSequence or a Generator.
    """
    if order < 1 or window < 1 or hidden < 1:
        raise ParameterError("order, window and hidden must all be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shapes = ModelParams.layer_shapes(window, hidden)

    def draw(shape):
        limit = np.sqrt(6.0 / (shape[0] + shape[1]))
        return rng.uniform(-limit, limit, size=shape)

    layers = []
    for shape in shapes:
        # draw order mirrors named_weights: forward bank first, then backward
        fwd = [draw(shape) for _ in range(order)]
        bwd = [draw(shape) for _ in range(order)]
        layers.append(LayerBank(fwd, bwd))
    return ModelParams(order, window, hidden, activation, layers)


def wrap_weights(params: ModelParams) -> tuple[list[LayerBank], list[ad.Tensor]]:
    """Tensor-wrapped copy of the bank structure, plus the flat node list.

    The Tensors wrap the parameter arrays in place, so optimizer updates
    to ``params`` are visible on the next wrap. Flat order matches
    ``named_weights``.
    """
    banks = []
    flat = []
    for bank in params.layers:
        fwd = [ad.Tensor(m) for m in bank.forward]
        bwd = [ad.Tensor(m) for m in bank.backward]
        banks.append(LayerBank(fwd, bwd))
        flat.extend(fwd)
        flat.extend(bwd)
    return banks, flat


@dataclass
class ForwardResult:
    reconstruction: object  # ndarray, or Tensor when weights are Tensors
    hidden1: object
    hidden2: object


def dgcn_layer(h, cheb_fwd, cheb_bwd, weights_fwd, weights_bwd):
    """One diffusion convolution: sum over orders and both directions."""
    if not (len(cheb_fwd) == len(cheb_bwd) == len(weights_fwd) == len(weights_bwd)):
        raise DimensionError("Chebyshev terms and weight banks must have equal length")
    out = None
    for t_f, t_b, w_f, w_b in zip(cheb_fwd, cheb_bwd, weights_fwd, weights_bwd):
        term = ad.add(ad.matmul(ad.matmul(t_f, h), w_f), ad.matmul(ad.matmul(t_b, h), w_b))
        out = term if out is None else ad.add(out, term)
    return out


def forward(params: ModelParams, x_masked, trans: TransitionPair, weights=None) -> ForwardResult:
    """Run the network on one (sub)graph.

    ``x_masked`` is the already-masked signal window, n_sub x window.
    ``weights`` substitutes a Tensor-wrapped bank structure for training;
    by default the raw parameter arrays are used and everything stays a
    plain ndarray.
    """
    banks = params.layers if weights is None else weights
    x_val = x_masked.value if isinstance(x_masked, ad.Tensor) else np.asarray(x_masked)
    if x_val.ndim != 2 or x_val.shape[1] != params.window:
        raise DimensionError(
            f"input must be n_sub x {params.window}, got shape {x_val.shape}"
        )
    if trans.n != x_val.shape[0]:
        raise DimensionError(
            f"transition matrices are {trans.n} nodes but input has {x_val.shape[0]} rows"
        )
    cheb_fwd = chebyshev(trans.forward, params.order)
    cheb_bwd = chebyshev(trans.backward, params.order)

    h1 = dgcn_layer(x_masked, cheb_fwd, cheb_bwd, banks[0].forward, banks[0].backward)
    h2 = ad.add(ad.activation(dgcn_layer(h1, cheb_fwd, cheb_bwd, banks[1].forward, banks[1].backward), params.activation), h1)
    x_hat = dgcn_layer(h2, cheb_fwd, cheb_bwd, banks[2].forward, banks[2].backward)
    return ForwardResult(reconstruction=x_hat, hidden1=h1, hidden2=h2)


def save_params(params: ModelParams, path) -> None:
    """Write weights to the binary container; round-trips byte-exactly."""
    meta = {
        "kind": "model",
        "order": params.order,
        "window": params.window,
        "hidden": params.hidden,
        "activation": params.activation,
    }
    write_container(path, meta, list(params.named_weights()))


def _params_from_matrices(meta: dict, matrices: dict, prefix: str = "") -> ModelParams:
    order = int(meta["order"])
    layers = []
    for l in range(3):
        fwd = [matrices[f"{prefix}layer{l}.fwd.k{k + 1}"] for k in range(order)]
        bwd = [matrices[f"{prefix}layer{l}.bwd.k{k + 1}"] for k in range(order)]
        layers.append(LayerBank(fwd, bwd))
    return ModelParams(order, int(meta["window"]), int(meta["hidden"]), meta["activation"], layers)


def load_params(path) -> ModelParams:
    meta, matrices = read_container(path)
    if meta.get("kind") not in ("model", "checkpoint"):
        raise ParameterError(f"{path}: container does not hold model weights")
    if meta.get("kind") == "checkpoint":
        from .trainer import load_checkpoint  # deferred, avoids module cycle

        return load_checkpoint(path).inference_params()
    return _params_from_matrices(meta, matrices)
