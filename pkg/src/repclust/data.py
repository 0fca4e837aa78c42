"""Datasets: CSV ingestion, min-max scaling and synthetic Gaussian blobs."""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import rng
from .rng import GeneratorState

BLOB_BOX = (-10.0, 10.0)
TAG_BLOB_CENTERS = 0
TAG_BLOB_SAMPLES = 1


class DatasetError(ValueError):
    """Malformed dataset input."""


class DatasetNotFoundError(DatasetError, FileNotFoundError):
    pass


class NonNumericCellError(DatasetError):
    def __init__(self, path: str, row: int, column: int, value: str):
        self.row, self.column, self.value = row, column, value
        super().__init__(f"{path}: row {row}, column {column}: non-numeric value {value!r}")


class RaggedRowError(DatasetError):
    def __init__(self, path: str, row: int, expected: int, got: int):
        self.row, self.expected, self.got = row, expected, got
        super().__init__(f"{path}: row {row} has {got} columns, expected {expected}")


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    name: str = "dataset"
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DatasetError(f"points must be a non-empty n x d matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DatasetError("points contain non-finite values")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
            if lab.shape[0] != pts.shape[0]:
                raise DatasetError(f"{lab.shape[0]} labels for {pts.shape[0]} points")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n_classes(self) -> int | None:
        if self.labels is None:
            return None
        return int(np.unique(self.labels).shape[0])

    def digest(self) -> str:
        """sha256 over shape and the big-endian bit patterns of the points."""
        h = hashlib.sha256()
        h.update(np.array(self.points.shape, dtype=">u8").tobytes())
        h.update(self.points.astype(">f8").tobytes())
        return h.hexdigest()


def _parse_float(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    return value


def load_csv(path: str | os.PathLike, label_column: int | str | None = None,
             name: str | None = None) -> Dataset:
    """Read a comma-separated numeric table.

    A first line with a non-numeric feature cell is taken as a header (naming
    the label column by string implies one). The label column (header name or 0-based index) is split off; its values may be
    integers or arbitrary strings, the latter numbered by first appearance.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DatasetNotFoundError(f"no such dataset file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetError(f"{path}: no data rows")

    header: list[str] | None = None
    probe_skip = None
    if isinstance(label_column, int):
        probe_skip = label_column if label_column >= 0 else len(rows[0]) + label_column
    if isinstance(label_column, str) or any(
        _parse_float(c) is None for col, c in enumerate(rows[0]) if col != probe_skip
    ):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DatasetError(f"{path}: header but no data rows")

    width = len(header) if header is not None else len(rows[0])
    label_idx: int | None = None
    if label_column is not None:
        if isinstance(label_column, str):
            if header is None or label_column not in header:
                raise DatasetError(f"{path}: label column {label_column!r} not found in header")
            label_idx = header.index(label_column)
        else:
            label_idx = label_column if label_column >= 0 else width + label_column
            if not 0 <= label_idx < width:
                raise DatasetError(f"{path}: label column {label_column} out of range")

    first_data_row = 2 if header is not None else 1
    features: list[list[float]] = []
    raw_labels: list[str] = []
    for offset, row in enumerate(rows):
        row_no = first_data_row + offset
        if len(row) != width:
            raise RaggedRowError(path, row_no, width, len(row))
        feats = []
        for col, cell in enumerate(row):
            if col == label_idx:
                raw_labels.append(cell.strip())
                continue
            value = _parse_float(cell)
            if value is None:
                raise NonNumericCellError(path, row_no, col, cell)
            feats.append(value)
        features.append(feats)

    labels = _encode_labels(raw_labels) if label_idx is not None else None
    return Dataset(
        points=np.array(features, dtype=np.float64),
        labels=labels,
        name=name or os.path.splitext(os.path.basename(path))[0],
        meta={"source": "csv", "path": path, "scaled": False},
    )


def _encode_labels(raw: list[str]) -> np.ndarray:
    try:
        as_int = [int(x) for x in raw]
    except ValueError:
        as_int = None
    if as_int is not None:
        return np.array(as_int, dtype=np.int64)
    codes: dict[str, int] = {}
    return np.array([codes.setdefault(x, len(codes)) for x in raw], dtype=np.int64)


def minmax_scale(data: Dataset) -> Dataset:
    """Map each feature to [0, 1]; a constant feature becomes 0.0 everywhere."""
    pts = data.points
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = hi - lo
    out = np.zeros_like(pts)
    live = span > 0
    out[:, live] = (pts[:, live] - lo[live]) / span[live]
    return replace(data, points=out, meta={**data.meta, "scaled": True})


def blob_sizes(n_samples: int, centers: int) -> list[int]:
    base, extra = divmod(n_samples, centers)
    return [base + 1 if c < extra else base for c in range(centers)]


def make_blobs(n_samples: int, n_features: int, centers: int, cluster_std: float,
               state: GeneratorState | int, name: str = "blobs") -> Dataset:
    """Isotropic Gaussian blobs, fully determined by the arguments.

    Centers are drawn uniformly from ``[-10, 10]^d`` on substream
    ``(TAG_BLOB_CENTERS, 0)``, center by center, coordinate by coordinate.
    Normal deviates come from substream ``(TAG_BLOB_SAMPLES, 0)`` in
    (blob, sample, dimension) order, two per Box-Muller pair; an unpaired
    trailing deviate is discarded. Points are stored blob by blob.
    """
    if n_samples < 1 or n_features < 1 or centers < 1:
        raise ValueError("n_samples, n_features and centers must all be positive")
    if not cluster_std > 0:
        raise ValueError(f"cluster_std must be > 0, got {cluster_std}")
    state = rng.as_state(state)
    lo, hi = BLOB_BOX
    width = hi - lo

    cs = rng.substream(state, TAG_BLOB_CENTERS, 0)
    center_xy = np.empty((centers, n_features), dtype=np.float64)
    for c in range(centers):
        for j in range(n_features):
            u, cs = rng.next_double(cs)
            center_xy[c, j] = lo + width * u

    total = n_samples * n_features
    deviates = np.empty(total + (total & 1), dtype=np.float64)
    ss = rng.substream(state, TAG_BLOB_SAMPLES, 0)
    for i in range(0, deviates.shape[0], 2):
        z0, z1, ss = rng.normal_pair(ss)
        deviates[i] = z0
        deviates[i + 1] = z1
    noise = deviates[:total].reshape(n_samples, n_features)

    sizes = blob_sizes(n_samples, centers)
    labels = np.repeat(np.arange(centers, dtype=np.int64), sizes)
    points = center_xy[labels] + cluster_std * noise
    return Dataset(
        points=points,
        labels=labels,
        name=name,
        meta={
            "source": "blobs",
            "n_samples": n_samples,
            "n_features": n_features,
            "centers": centers,
            "cluster_std": cluster_std,
            "center_box": list(BLOB_BOX),
            "state": state.to_hex(),
            "scaled": False,
            "center_locations": center_xy.tolist(),
        },
    )


def save_csv(data: Dataset, path: str | os.PathLike) -> None:
    """Write features (and a trailing ``label`` column when present) with a header.

    Values use ``repr`` so that reading the file back is bit-exact.
    """
    header = [f"x{j}" for j in range(data.d)]
    if data.labels is not None:
        header.append("label")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.points[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            w.writerow(row)
