"""Inductive graph neural network kriging for sensor networks.

Train a diffusion graph convolution model on randomly sampled subgraphs
of a sensor network, then reconstruct signals at sensors (or entirely
new locations) it never saw, without retraining.
"""

from .errors import (
    DimensionError,
    GraphCycleError,
    IngestionError,
    NetkrigeError,
    NonFiniteError,
    ParameterError,
    TrainingError,
)
from .autodiff import Tensor, backward, frobenius_sq
from .graph import (
    AdjacencyMatrix,
    DistanceMatrix,
    TransitionPair,
    binary_adjacency,
    chebyshev,
    default_sigma,
    gaussian_adjacency,
    transitions,
)
from .sampler import SamplerConfig, SignalMatrix, SubgraphSample, draw_batch, draw_sample
from .model import ModelParams, dgcn_layer, forward, init_params, load_params, save_params
from .trainer import (
    NormStats,
    OptimizerConfig,
    TrainConfig,
    TrainReport,
    denormalize,
    load_checkpoint,
    loss,
    normalize,
    train,
)
from .kriging import (
    KrigingRequest,
    KrigingResult,
    MetricsReport,
    knn_baseline,
    krige,
    metrics,
    sliding_eval,
    sliding_krige,
    virtual_line,
)
from .data import (
    Dataset,
    FieldParams,
    Geometry,
    SplitSpec,
    build_adjacency,
    gen_synthetic,
    load_csv,
    save_csv,
    split,
)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMatrix",
    "Dataset",
    "DimensionError",
    "DistanceMatrix",
    "FieldParams",
    "Geometry",
    "GraphCycleError",
    "IngestionError",
    "KrigingRequest",
    "KrigingResult",
    "MetricsReport",
    "ModelParams",
    "NetkrigeError",
    "NonFiniteError",
    "NormStats",
    "OptimizerConfig",
    "ParameterError",
    "SamplerConfig",
    "SignalMatrix",
    "SplitSpec",
    "SubgraphSample",
    "Tensor",
    "TrainConfig",
    "TrainReport",
    "TrainingError",
    "TransitionPair",
    "backward",
    "binary_adjacency",
    "build_adjacency",
    "chebyshev",
    "default_sigma",
    "denormalize",
    "dgcn_layer",
    "draw_batch",
    "draw_sample",
    "forward",
    "frobenius_sq",
    "gaussian_adjacency",
    "gen_synthetic",
    "init_params",
    "knn_baseline",
    "krige",
    "load_checkpoint",
    "load_csv",
    "load_params",
    "loss",
    "metrics",
    "normalize",
    "save_csv",
    "save_params",
    "sliding_eval",
    "sliding_krige",
    "split",
    "train",
    "transitions",
    "virtual_line",
]
