"""Sensor-network graphs: adjacency kernels, transitions, Chebyshev filters.

Edge weights come from one of two constructions: a Gaussian kernel over
pairwise distances, ``W_ij = exp(-(dist_ij / sigma)^2)``, or a plain
binary neighbor matrix. Message passing uses the row-normalized forward
transition matrix ``W / rowsum(W)`` together with its backward
counterpart built from the transpose, which differ exactly when the
graph is directed. Diffusion filters of order K are the Chebyshev terms
``T_1 .. T_K`` of a transition matrix, via the recursion
``T_k(X) = 2 X T_{k-1}(X) - T_{k-2}(X)`` with ``T_0 = I`` and
``T_1 = X``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError

EARTH_RADIUS_KM = 6371.0088


@dataclass
class DistanceMatrix:
    """Pairwise nonnegative distances, possibly asymmetric."""

    values: np.ndarray
    symmetric: bool = True

    def __post_init__(self):
        a = np.ascontiguousarray(self.values, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"distance matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("distance matrix contains NaN or Inf entries")
        if np.any(a < 0):
            raise ParameterError("distance matrix contains negative entries")
        if np.any(np.diag(a) != 0):
            raise ParameterError("distance matrix diagonal must be zero")
        if self.symmetric and not np.array_equal(a, a.T):
            raise ParameterError("distance matrix marked symmetric but is not")
        self.values = a

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_coordinates(cls, coords, metric: str = "euclidean") -> "DistanceMatrix":
        """Pairwise distances for an n x 2 coordinate array.

        ``euclidean`` treats columns as planar (x, y); ``haversine_km``
        treats them as (lon, lat) in degrees and returns kilometers.
        """
        c = np.ascontiguousarray(coords, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 2:
            raise DimensionError(f"coordinates must be n x 2, got shape {c.shape}")
        if metric == "euclidean":
            diff = c[:, None, :] - c[None, :, :]
            d = np.sqrt((diff * diff).sum(axis=2))
        elif metric == "haversine_km":
            lon = np.radians(c[:, 0])
            lat = np.radians(c[:, 1])
            dlat = lat[:, None] - lat[None, :]
            dlon = lon[:, None] - lon[None, :]
            h = np.sin(dlat / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2) ** 2
            d = 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
        else:
            raise ParameterError(f"unknown distance metric {metric!r}")
        d = (d + d.T) / 2  # force bitwise symmetry
        np.fill_diagonal(d, 0.0)
        return cls(d, symmetric=True)


@dataclass
class AdjacencyMatrix:
    """Edge weights in [0, 1]; ``kind`` records the construction."""

    values: np.ndarray
    kind: str = "gaussian"

    def __post_init__(self):
        a = np.ascontiguousarray(self.values, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"adjacency matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("adjacency matrix contains NaN or Inf entries")
        if np.any(a < 0) or np.any(a > 1):
            raise ParameterError("adjacency weights must lie in [0, 1]")
        if self.kind == "binary" and not np.all((a == 0) | (a == 1)):
            raise ParameterError("binary adjacency entries must be 0 or 1")
        if self.kind not in ("gaussian", "binary"):
            raise ParameterError(f"unknown adjacency kind {self.kind!r}")
        self.values = a

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def submatrix(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.intp)
        return self.values[np.ix_(idx, idx)]


@dataclass
class TransitionPair:
    """Row-stochastic forward and backward transition matrices.

    Rows of a node with no outgoing (resp. incoming) weight are all
    zero: an isolated node receives no messages.
    """

    forward: np.ndarray
    backward: np.ndarray

    @property
    def n(self) -> int:
        return self.forward.shape[0]


def default_sigma(distances: DistanceMatrix) -> float:
    """Kernel width heuristic: standard deviation of off-diagonal distances."""
    n = distances.n
    if n < 2:
        raise ParameterError("need at least two sensors to derive a kernel width")
    off = distances.values[~np.eye(n, dtype=bool)]
    sigma = float(off.std())
    if not sigma > 0:
        raise ParameterError("distances are degenerate, specify sigma explicitly")
    return sigma


def gaussian_adjacency(distances: DistanceMatrix, sigma: float) -> AdjacencyMatrix:
    """Gaussian kernel weights ``exp(-(dist / sigma)^2)``; diagonal is 1."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    scaled = distances.values / sigma
    return AdjacencyMatrix(np.exp(-(scaled * scaled)), kind="gaussian")


def binary_adjacency(neighbors, n: int) -> AdjacencyMatrix:
    """Symmetric 0/1 adjacency from a list of index pairs; diagonal is 0."""
    if n < 1:
        raise ParameterError(f"node count must be positive, got {n}")
    w = np.zeros((n, n))
    for i, j in neighbors:
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise ParameterError(f"neighbor pair ({i}, {j}) out of range for n={n}")
        if i == j:
            raise ParameterError(f"self pair ({i}, {i}) not allowed, diagonal stays 0")
        w[i, j] = 1.0
        w[j, i] = 1.0
    return AdjacencyMatrix(w, kind="binary")


def transitions(adjacency) -> TransitionPair:
    """Row-normalize ``W`` and ``W^T``; all-zero rows stay all-zero."""
    a = adjacency.values if isinstance(adjacency, AdjacencyMatrix) else np.ascontiguousarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency must be square, got shape {a.shape}")

    def normalize(m: np.ndarray) -> np.ndarray:
        rowsums = m.sum(axis=1, keepdims=True)
        return np.divide(m, rowsums, out=np.zeros_like(m), where=rowsums > 0)

    return TransitionPair(forward=normalize(a), backward=normalize(np.ascontiguousarray(a.T)))


def chebyshev(x: np.ndarray, order: int) -> list[np.ndarray]:
    """Chebyshev terms ``[T_1(x), ..., T_order(x)]`` of a square matrix."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError(f"Chebyshev filter needs a square matrix, got shape {x.shape}")
    if order < 1:
        raise ParameterError(f"Chebyshev order must be at least 1, got {order}")
    terms = [x]
    prev_prev = np.eye(x.shape[0])
    prev = x
    for _ in range(2, order + 1):
        cur = 2.0 * (x @ prev) - prev_prev
        terms.append(cur)
        prev_prev, prev = prev, cur
    return terms
