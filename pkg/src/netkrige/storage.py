"""Deterministic binary container for model and checkpoint files.

Layout: an 8-byte magic, an 8-byte little-endian header length, a JSON
header (sorted keys, no whitespace), then the raw float64 little-endian
bytes of each matrix in header order. No timestamps or platform data
anywhere, so identical content produces identical bytes. This is what
makes checkpoint byte-for-byte reproducibility testable.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import IngestionError

MAGIC = b"NKRG0001"


def write_container(path, meta: dict, matrices: Sequence[tuple[str, np.ndarray]]) -> None:
    entries = []
    blocks = []
    for name, m in matrices:
        a = np.ascontiguousarray(m, dtype="<f8")
        if a.ndim != 2:
            raise ValueError(f"matrix {name!r} must be 2-D, got shape {a.shape}")
        entries.append({"name": name, "rows": int(a.shape[0]), "cols": int(a.shape[1])})
        blocks.append(a.tobytes())
    header = json.dumps({"meta": meta, "matrices": entries}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for b in blocks:
            f.write(b)


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise IngestionError(f"{path}: not a netkrige container (bad magic)")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        matrices: dict[str, np.ndarray] = {}
        for entry in header["matrices"]:
            rows, cols = entry["rows"], entry["cols"]
            buf = f.read(rows * cols * 8)
            if len(buf) != rows * cols * 8:
                raise IngestionError(f"{path}: truncated matrix block {entry['name']!r}")
            matrices[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(rows, cols).astype(np.float64)
    return header["meta"], matrices
