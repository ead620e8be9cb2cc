"""Dataset ingestion, splitting and synthetic generation.

File formats (UTF-8, comma-delimited, ``#`` lines are comments):

* signals: header ``sensor_id,t0,t1,...``, one row per sensor. Empty
  cells (or a configured sentinel) mark missing readings.
* geometry, one of three forms told apart by the first data line:
    - ``sensor_id,x,y``      planar coordinates, Euclidean distances
    - ``sensor_id,lon,lat``  degrees, haversine distances in km
    - ``i,j``                undirected neighbor pairs (binary graphs)
    - anything else is parsed as a full n x n distance matrix
* numbers are written with ``repr`` so save/load round-trips exactly.

The synthetic generator sums a few traveling plane waves over sensors
placed uniformly in the unit square, yielding a spatially smooth field
whose correlation decays with distance. All draws come from numpy's
``default_rng`` (PCG64); the CLI records the algorithm and seed in the
emitted file header.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IngestionError, NetkrigeError, ParameterError
from .graph import AdjacencyMatrix, DistanceMatrix, binary_adjacency, default_sigma, gaussian_adjacency
from .sampler import SignalMatrix


@dataclass
class Geometry:
    """Exactly one of coordinates, an explicit distance matrix, or a
    binary neighbor list."""

    coords: np.ndarray | None = None
    metric: str = "euclidean"
    distances: DistanceMatrix | None = None
    edges: list | None = None

    def __post_init__(self):
        present = sum(x is not None for x in (self.coords, self.distances, self.edges))
        if present != 1:
            raise ParameterError("geometry needs exactly one of coords, distances or edges")
        if self.coords is not None:
            self.coords = np.ascontiguousarray(self.coords, dtype=np.float64)

    @property
    def kind(self) -> str:
        if self.coords is not None:
            return "coords"
        if self.distances is not None:
            return "distance"
        return "edges"

    @property
    def n(self) -> int | None:
        if self.coords is not None:
            return self.coords.shape[0]
        if self.distances is not None:
            return self.distances.n
        return None  # edge lists do not pin the sensor count

    def distance_matrix(self) -> DistanceMatrix:
        if self.coords is not None:
            return DistanceMatrix.from_coordinates(self.coords, metric=self.metric)
        if self.distances is not None:
            return self.distances
        raise ParameterError("binary neighbor geometry carries no distances")


@dataclass
class Dataset:
    name: str
    signals: SignalMatrix
    geometry: Geometry
    sensor_ids: list = field(default_factory=list)
    comments: list = field(default_factory=list)  # '#' header lines, round-tripped
    period: str | None = None  # sampling period, free text ("5 min", "1 month")
    units: str | None = None

    def __post_init__(self):
        if not self.sensor_ids:
            self.sensor_ids = [f"s{i}" for i in range(self.signals.n)]
        if len(self.sensor_ids) != self.signals.n:
            raise ParameterError(
                f"{len(self.sensor_ids)} sensor ids for {self.signals.n} signal rows"
            )
        gn = self.geometry.n
        if gn is not None and gn != self.signals.n:
            raise ParameterError(f"geometry covers {gn} sensors but signals have {self.signals.n}")

    @property
    def n(self) -> int:
        return self.signals.n

    @property
    def p(self) -> int:
        return self.signals.p


@dataclass
class SplitSpec:
    train_fraction: float = 0.7
    unsampled_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        for name in ("train_fraction", "unsampled_fraction"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ParameterError(f"{name} must lie in (0, 1), got {v}")


@dataclass
class Split:
    train: SignalMatrix  # observed rows, training time only
    test: SignalMatrix  # all rows, test time
    observed: np.ndarray
    unsampled: np.ndarray
    train_end: int


def split(ds: Dataset, spec: SplitSpec) -> Split:
    """Pick unsampled sensors at random and cut the time axis.

    Training data holds only observed-sensor rows over the first
    ``train_fraction`` of the time steps; unsampled rows never enter it.
    """
    n, p = ds.n, ds.p
    n_unsampled = max(1, int(n * spec.unsampled_fraction + 0.5))
    if n - n_unsampled < 2:
        raise ParameterError(f"{n} sensors leave fewer than 2 observed after the split")
    train_end = int(p * spec.train_fraction)
    if train_end < 2 or p - train_end < 1:
        raise ParameterError(f"{p} time steps are too few for a {spec.train_fraction} split")
    rng = np.random.default_rng(spec.seed)
    unsampled = np.sort(rng.choice(n, size=n_unsampled, replace=False))
    observed = np.setdiff1d(np.arange(n), unsampled)
    train = ds.signals.take_rows(observed).slice_time(0, train_end)
    test = ds.signals.slice_time(train_end, p)
    return Split(train=train, test=test, observed=observed, unsampled=unsampled, train_end=train_end)


@dataclass
class FieldParams:
    """Traveling-wave mixture for the synthetic field.

    The default wavenumber band makes the field vary on scales around a
    tenth of the unit square, so interpolating an unsampled sensor from
    its neighbors is genuinely nontrivial at a few dozen sensors.
    """

    waves: int = 3
    amplitude: tuple = (0.5, 1.5)
    frequency: tuple = (0.02, 0.2)  # rad per time step
    wavenumber: tuple = (7.0, 9.0)  # rad per unit distance


@dataclass
class WaveSet:
    amplitudes: np.ndarray
    frequencies: np.ndarray
    wavevectors: np.ndarray  # waves x 2
    phases: np.ndarray


def sample_waves(params: FieldParams, rng: np.random.Generator) -> WaveSet:
    amps, freqs, vecs, phases = [], [], [], []
    for _ in range(params.waves):
        amps.append(rng.uniform(*params.amplitude))
        freqs.append(rng.uniform(*params.frequency))
        angle = rng.uniform(0, 2 * np.pi)
        magnitude = rng.uniform(*params.wavenumber)
        vecs.append(magnitude * np.array([np.cos(angle), np.sin(angle)]))
        phases.append(rng.uniform(0, 2 * np.pi))
    return WaveSet(np.array(amps), np.array(freqs), np.array(vecs), np.array(phases))


def wave_values(waves: WaveSet, coords: np.ndarray, p: int) -> np.ndarray:
    """Noise-free field at the given positions: the field is a function
    of position alone, so colocated sensors read identical signals."""
    coords = np.asarray(coords, dtype=np.float64)
    t = np.arange(p)
    values = np.zeros((coords.shape[0], p))
    for a, w, kvec, phi in zip(waves.amplitudes, waves.frequencies, waves.wavevectors, waves.phases):
        spatial = coords @ kvec + phi
        values += a * np.sin(w * t[None, :] + spatial[:, None])
    return values


def gen_synthetic(
    n: int,
    p: int,
    field_params: FieldParams | None = None,
    noise_std: float = 0.03,
    seed: int = 0,
) -> Dataset:
    """Sensors uniform in the unit square, signals from a smooth
    traveling-wave field plus optional Gaussian noise. Bit-reproducible
    for a given seed."""
    if n < 4:
        raise ParameterError(f"need at least 4 sensors, got {n}")
    if p < 2:
        raise ParameterError(f"need at least 2 time steps, got {p}")
    if noise_std < 0:
        raise ParameterError(f"noise_std must be nonnegative, got {noise_std}")
    fp = field_params or FieldParams()
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, 1.0, size=(n, 2))
    waves = sample_waves(fp, rng)
    values = wave_values(waves, coords, p)
    if noise_std > 0:
        values = values + rng.normal(0.0, noise_std, size=(n, p))
    signals = SignalMatrix(values, np.ones((n, p), dtype=bool))
    return Dataset(
        name=f"synthetic-n{n}-p{p}-seed{seed}",
        signals=signals,
        geometry=Geometry(coords=coords, metric="euclidean"),
    )


def build_adjacency(
    ds: Dataset,
    kind: str | None = None,
    sigma: float | None = None,
    threshold=None,
) -> tuple[AdjacencyMatrix, dict]:
    """Adjacency over all sensors, plus the resolved settings.

    ``kind`` defaults to gaussian when distances exist, binary for edge
    lists. Binary from distances links pairs at or below ``threshold``
    (``median``, the default, uses the median off-diagonal distance).
    """
    if ds.geometry.kind == "edges":
        if kind == "gaussian":
            raise ParameterError("gaussian adjacency needs distances, geometry only lists neighbors")
        w = binary_adjacency(ds.geometry.edges, ds.n)
        return w, {"adjacency": "binary", "sigma": None, "threshold": None}
    dm = ds.geometry.distance_matrix()
    kind = kind or "gaussian"
    if kind == "gaussian":
        resolved_sigma = float(sigma) if sigma is not None else default_sigma(dm)
        return gaussian_adjacency(dm, resolved_sigma), {
            "adjacency": "gaussian",
            "sigma": resolved_sigma,
            "threshold": None,
        }
    if kind == "binary":
        sym = (dm.values + dm.values.T) / 2
        off = sym[~np.eye(ds.n, dtype=bool)]
        thr = float(np.median(off)) if threshold in (None, "median") else float(threshold)
        pairs = [(i, j) for i in range(ds.n) for j in range(i + 1, ds.n) if sym[i, j] <= thr]
        return binary_adjacency(pairs, ds.n), {"adjacency": "binary", "sigma": None, "threshold": thr}
    raise ParameterError(f"unknown adjacency kind {kind!r}")


# ---------------------------------------------------------------------------
# CSV reading and writing


def _data_lines(path) -> list[tuple[int, str]]:
    """(1-based line number, stripped text) for non-comment, non-blank lines."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for i, raw in enumerate(f, start=1):
            text = raw.rstrip("\n").rstrip("\r")
            if not text.strip() or text.lstrip().startswith("#"):
                continue
            out.append((i, text))
    return out


def _comment_lines(path) -> list[str]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            text = raw.rstrip("\n").rstrip("\r")
            if text.lstrip().startswith("#"):
                out.append(text.lstrip()[1:].strip())
            elif text.strip():
                break  # comments are only honored before the data
    return out


def _parse_cell(cell: str, line: int, what: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise IngestionError(f"non-numeric {what} {cell!r}", line=line) from None
    if not np.isfinite(v):
        raise IngestionError(f"non-finite {what} {cell!r}", line=line)
    return v


def _is_missing(cell: str, sentinel) -> bool:
    if cell == "":
        return True
    if sentinel is None:
        return False
    if cell == str(sentinel):
        return True
    try:
        return float(cell) == float(sentinel)
    except ValueError:
        return False


def load_signals(path, missing_sentinel=None) -> tuple[list, SignalMatrix, list]:
    """Read a signal CSV: (sensor ids, signals, header comments)."""
    lines = _data_lines(path)
    if not lines:
        raise IngestionError(f"{path}: empty signal file")
    header_line, header = lines[0]
    cols = header.split(",")
    if cols[0] != "sensor_id" or len(cols) < 2:
        raise IngestionError("signal header must start with 'sensor_id' and list time columns", line=header_line)
    p = len(cols) - 1
    ids, rows, flags = [], [], []
    for line, text in lines[1:]:
        cells = text.split(",")
        if len(cells) != p + 1:
            raise IngestionError(f"expected {p + 1} cells, got {len(cells)}", line=line)
        ids.append(cells[0])
        row = np.zeros(p)
        obs = np.ones(p, dtype=bool)
        for j, cell in enumerate(cells[1:]):
            cell = cell.strip()
            if _is_missing(cell, missing_sentinel):
                obs[j] = False
            else:
                row[j] = _parse_cell(cell, line, "signal value")
        rows.append(row)
        flags.append(obs)
    if not rows:
        raise IngestionError(f"{path}: no sensor rows")
    return ids, SignalMatrix(np.array(rows), np.array(flags)), _comment_lines(path)


def load_geometry(path, n: int, sensor_ids: list | None = None) -> Geometry:
    """Read a geometry CSV in any of the three supported forms."""
    lines = _data_lines(path)
    if not lines:
        raise IngestionError(f"{path}: empty geometry file")
    first_line, first = lines[0]
    head = [c.strip() for c in first.split(",")]

    if head[0] == "sensor_id":
        if head[1:] == ["x", "y"]:
            metric = "euclidean"
        elif head[1:] == ["lon", "lat"]:
            metric = "haversine_km"
        else:
            raise IngestionError(
                "coordinate header must be 'sensor_id,x,y' or 'sensor_id,lon,lat'", line=first_line
            )
        ids, coords = [], []
        for line, text in lines[1:]:
            cells = text.split(",")
            if len(cells) != 3:
                raise IngestionError(f"expected 3 cells, got {len(cells)}", line=line)
            ids.append(cells[0])
            coords.append([_parse_cell(cells[1], line, "coordinate"), _parse_cell(cells[2], line, "coordinate")])
        if len(ids) != n:
            raise IngestionError(f"{path}: geometry lists {len(ids)} sensors, signals have {n}")
        if sensor_ids is not None and ids != list(sensor_ids):
            raise IngestionError(f"{path}: geometry sensor ids do not match the signal file order")
        return Geometry(coords=np.array(coords), metric=metric)

    if head == ["i", "j"]:
        edges = []
        for line, text in lines[1:]:
            cells = text.split(",")
            if len(cells) != 2:
                raise IngestionError(f"expected 2 cells, got {len(cells)}", line=line)
            try:
                i, j = int(cells[0]), int(cells[1])
            except ValueError:
                raise IngestionError(f"non-integer edge entry {text!r}", line=line) from None
            if not (0 <= i < n and 0 <= j < n):
                raise IngestionError(f"edge ({i}, {j}) out of range for {n} sensors", line=line)
            edges.append((i, j))
        return Geometry(edges=edges)

    # full distance matrix: every line is a row of n numbers
    rows = []
    for line, text in lines:
        cells = text.split(",")
        if len(cells) != n:
            raise IngestionError(f"distance row has {len(cells)} cells, expected {n}", line=line)
        row = [_parse_cell(c, line, "distance") for c in cells]
        if any(v < 0 for v in row):
            raise IngestionError("negative distance entry", line=line)
        rows.append(row)
    if len(rows) != n:
        raise IngestionError(f"{path}: distance matrix has {len(rows)} rows, expected {n}")
    d = np.array(rows)
    try:
        dm = DistanceMatrix(d, symmetric=bool(np.array_equal(d, d.T)))
    except NetkrigeError as e:
        raise IngestionError(f"{path}: bad distance matrix: {e}") from e
    return Geometry(distances=dm)


def _meta_comment(comments: list, key: str) -> str | None:
    prefix = f"{key}:"
    for c in comments:
        if c.startswith(prefix):
            return c[len(prefix):].strip()
    return None


def load_csv(signal_path, geometry_path, missing_sentinel=None, name: str | None = None) -> Dataset:
    ids, signals, comments = load_signals(signal_path, missing_sentinel=missing_sentinel)
    geometry = load_geometry(geometry_path, signals.n, sensor_ids=ids)
    return Dataset(
        name=name or _meta_comment(comments, "dataset") or Path(signal_path).stem,
        signals=signals,
        geometry=geometry,
        sensor_ids=ids,
        comments=comments,
        period=_meta_comment(comments, "period"),
        units=_meta_comment(comments, "units"),
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def save_signals(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        comments = list(ds.comments)
        if ds.period is not None and _meta_comment(comments, "period") is None:
            comments.append(f"period: {ds.period}")
        if ds.units is not None and _meta_comment(comments, "units") is None:
            comments.append(f"units: {ds.units}")
        for c in comments:
            f.write(f"# {c}\n")
        p = ds.p
        f.write("sensor_id," + ",".join(f"t{j}" for j in range(p)) + "\n")
        for i, sid in enumerate(ds.sensor_ids):
            cells = [
                _fmt(ds.signals.values[i, j]) if ds.signals.observed[i, j] else ""
                for j in range(p)
            ]
            f.write(sid + "," + ",".join(cells) + "\n")


def save_geometry(ds: Dataset, path) -> None:
    g = ds.geometry
    with open(path, "w", encoding="utf-8") as f:
        if g.kind == "coords":
            f.write("sensor_id,x,y\n" if g.metric == "euclidean" else "sensor_id,lon,lat\n")
            for sid, (x, y) in zip(ds.sensor_ids, g.coords):
                f.write(f"{sid},{_fmt(x)},{_fmt(y)}\n")
        elif g.kind == "edges":
            f.write("i,j\n")
            for i, j in g.edges:
                f.write(f"{i},{j}\n")
        else:
            for row in g.distances.values:
                f.write(",".join(_fmt(v) for v in row) + "\n")


def save_csv(ds: Dataset, signal_path, geometry_path) -> None:
    save_signals(ds, signal_path)
    save_geometry(ds, geometry_path)
