"""DBSCAN in three passes: identify cores, link cores, attach borders.

Conventions:

* ``q`` is a neighbor of ``p`` iff ``sq_euclidean(p, q) <= eps**2``. The
  comparison is on squared values (no square root), and a point is its own
  neighbor.
* ``p`` is core iff its neighborhood holds at least ``min_pts`` points.
* Clusters are the connected components of the core/core neighbor graph,
  numbered 0, 1, ... by their smallest core index.
* A non-core point with core neighbors joins the cluster of the lowest-index
  one; otherwise it is noise (label -1).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .data import Dataset
from .detnum import parallel_map_fixed, row_blocks

NOISE = -1
IDENTIFY_BLOCK_ROWS = 64


class Role(IntEnum):
    NOISE = 0
    BORDER = 1
    CORE = 2


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be >= 1, got {self.min_pts}")

    def to_dict(self) -> dict:
        return {"eps": self.eps, "min_pts": self.min_pts}


@dataclass(frozen=True)
class Neighborhoods:
    """Neighbor lists in CSR form; each row is sorted by ascending point index."""

    indptr: np.ndarray
    indices: np.ndarray

    def row(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def sizes(self) -> np.ndarray:
        return np.diff(self.indptr)


@dataclass(frozen=True)
class DbscanResult:
    labels: np.ndarray
    roles: np.ndarray
    n_clusters: int


def identify(points: np.ndarray, params: DbscanParams,
             worker_count: int = 1) -> tuple[np.ndarray, Neighborhoods]:
    """Exhaustive neighbor search and core flags."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    n, d = points.shape
    eps_sq = params.eps * params.eps
    cols = [np.ascontiguousarray(points[:, j]) for j in range(d)]

    def block(bounds: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = bounds
        # 0.0 + x*x == x*x bitwise (squares are never -0.0), so the first
        # dimension seeds the accumulator directly
        acc = np.subtract.outer(cols[0][lo:hi], cols[0])
        np.multiply(acc, acc, out=acc)
        if d > 1:
            diff = np.empty_like(acc)
            for j in range(1, d):
                np.subtract.outer(cols[j][lo:hi], cols[j], out=diff)
                np.multiply(diff, diff, out=diff)
                np.add(acc, diff, out=acc)
        rows, nbrs = np.nonzero(acc <= eps_sq)
        counts = np.bincount(rows, minlength=hi - lo)
        return counts, nbrs

    parts = parallel_map_fixed(row_blocks(n, IDENTIFY_BLOCK_ROWS), worker_count, block)
    counts = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64)
    indices = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    core = counts >= params.min_pts
    return core, Neighborhoods(indptr, indices.astype(np.int64))


def _find(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def create(core_flags: np.ndarray, neighbors: Neighborhoods) -> np.ndarray:
    """Cluster id per point (``-1`` for non-core) from union-find over core edges.

    Points are visited in ascending index and, within a point, neighbors in
    ascending index. Roots are always the smaller index, so every component
    is rooted at its smallest core point, and ids follow root order.
    """
    n = core_flags.shape[0]
    parent = list(range(n))
    core_idx = np.flatnonzero(core_flags)
    owner = np.repeat(np.arange(n), neighbors.sizes())
    keep = core_flags[owner] & core_flags[neighbors.indices] & (neighbors.indices > owner)
    src = owner[keep].tolist()
    dst = neighbors.indices[keep].tolist()
    for i, j in zip(src, dst):
        ri = _find(parent, i)
        rj = _find(parent, j)
        if ri != rj:
            if ri < rj:
                parent[rj] = ri
            else:
                parent[ri] = rj

    labels = np.full(n, NOISE, dtype=np.int64)
    ids: dict[int, int] = {}
    for i in core_idx.tolist():
        root = _find(parent, i)
        if root not in ids:
            ids[root] = len(ids)
        labels[i] = ids[root]
    return labels


def assign(core_labels: np.ndarray, core_flags: np.ndarray,
           neighbors: Neighborhoods) -> DbscanResult:
    n = core_flags.shape[0]
    labels = np.array(core_labels, dtype=np.int64, copy=True)
    roles = np.full(n, Role.NOISE, dtype=np.int8)
    roles[core_flags] = Role.CORE
    if n:
        # lowest core neighbor per row; n marks "none"
        cand = np.where(core_flags[neighbors.indices], neighbors.indices, n)
        first_core = np.minimum.reduceat(cand, neighbors.indptr[:-1])
        border = ~core_flags & (first_core < n)
        labels[border] = core_labels[first_core[border]]
        roles[border] = Role.BORDER
        labels[~core_flags & ~border] = NOISE
    n_clusters = int(labels.max()) + 1 if n and labels.max() >= 0 else 0
    labels.setflags(write=False)
    roles.setflags(write=False)
    return DbscanResult(labels=labels, roles=roles, n_clusters=n_clusters)


def dbscan_fit(data: Dataset | np.ndarray, params: DbscanParams,
               worker_count: int = 1) -> DbscanResult:
    points = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.shape[0] < 1:
        raise ValueError("empty dataset")
    core, neighbors = identify(points, params, worker_count)
    return assign(create(core, neighbors), core, neighbors)
