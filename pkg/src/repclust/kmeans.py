"""Lloyd's K-Means with every source of run-to-run variation pinned down.

Pinned choices:

* restart ``r`` draws its initial centers from ``substream(state, TAG_KMEANS_INIT, r)``;
* assignment ties go to the lowest center index;
* centers are fixed-order sums of members (in point order) divided by the count;
* an empty cluster takes the point farthest from its own center
  (see :func:`repair_empty`);
* convergence means the labels did not change, with no tolerance;
* the winning restart has the smallest inertia, ties going to the lowest restart index.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import rng
from .data import Dataset
from .detnum import (DEFAULT_CHUNK_SIZE, ReductionPlan, fixed_sum, parallel_map_fixed,
                     row_blocks)
from .metrics import inertia as _inertia, point_costs
from .rng import GeneratorState

TAG_KMEANS_INIT = 2
INIT_METHODS = ("random-points", "kmeans++")


class DegenerateInputError(ValueError):
    """More empty clusters than points available to refill them."""


@dataclass(frozen=True)
class KMeansParams:
    k: int
    n_init: int = 5
    max_iter: int = 300
    init_method: str = "random-points"
    state: GeneratorState = field(default_factory=lambda: GeneratorState.from_seed(42))
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.n_init < 1:
            raise ValueError(f"n_init must be >= 1, got {self.n_init}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.init_method not in INIT_METHODS:
            raise ValueError(f"init_method must be one of {INIT_METHODS}")
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")
        object.__setattr__(self, "state", rng.as_state(self.state))

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["state"] = self.state.to_hex()
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "KMeansParams":
        return cls(**d)


@dataclass(frozen=True)
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    best_init_index: int
    n_iter: int
    params_echo: KMeansParams
    restart_inertias: tuple[float, ...] = ()
    inertia_trace: tuple[float, ...] | None = None


def assign(points: np.ndarray, centers: np.ndarray, worker_count: int = 1) -> np.ndarray:
    """Nearest center per point; exact ties resolve to the lowest center index."""
    points = np.asarray(points, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    if centers.shape[0] < 1:
        raise ValueError("need at least one center")

    def block(bounds: tuple[int, int]) -> np.ndarray:
        lo, hi = bounds
        chunk = points[lo:hi]
        dist = np.empty((centers.shape[0], hi - lo), dtype=np.float64)
        for c in range(centers.shape[0]):
            acc = np.zeros(hi - lo, dtype=np.float64)
            for j in range(points.shape[1]):
                diff = chunk[:, j] - centers[c, j]
                acc = acc + diff * diff
            dist[c] = acc
        # argmin returns the first minimum, i.e. the lowest center index
        return np.argmin(dist, axis=0)

    parts = parallel_map_fixed(row_blocks(points.shape[0]), worker_count, block)
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(parts).astype(np.int64)


def update(points: np.ndarray, labels: np.ndarray, k: int, previous: np.ndarray,
           chunk_size: int = DEFAULT_CHUNK_SIZE) -> tuple[np.ndarray, np.ndarray]:
    """Mean of each cluster's members; empty clusters keep ``previous`` and are flagged."""
    centers = np.array(previous, dtype=np.float64, copy=True)
    empty = np.zeros(k, dtype=bool)
    for c in range(k):
        members = np.flatnonzero(labels == c)
        if members.shape[0] == 0:
            empty[c] = True
            continue
        plan = ReductionPlan(members.shape[0], chunk_size)
        for j in range(points.shape[1]):
            centers[c, j] = fixed_sum(points[members, j], plan) / members.shape[0]
    return centers, empty


def repair_empty(points: np.ndarray, labels: np.ndarray, centers: np.ndarray,
                 empty_flags: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Refill empty clusters, lowest cluster index first.

    Each empty cluster takes the point with the largest squared distance to
    its currently assigned center (lowest point index on ties), skipping points
    already taken this round. That point moves to the repaired cluster and
    becomes its center. Other centers are left as they are.
    """
    labels = np.array(labels, dtype=np.int64, copy=True)
    centers = np.array(centers, dtype=np.float64, copy=True)
    empty_ids = np.flatnonzero(empty_flags)
    if empty_ids.shape[0] > points.shape[0]:
        raise DegenerateInputError(
            f"{empty_ids.shape[0]} empty clusters but only {points.shape[0]} points"
        )
    costs = point_costs(points, centers, labels)
    taken = np.zeros(points.shape[0], dtype=bool)
    for c in empty_ids:
        masked = np.where(taken, -np.inf, costs)
        idx = int(np.argmax(masked))
        taken[idx] = True
        labels[idx] = c
        centers[c] = points[idx]
    return labels, centers


def init_random_points(points: np.ndarray, k: int, state: GeneratorState) -> np.ndarray:
    idx, _ = rng.uniform_indices(state, points.shape[0], k)
    return points[idx].copy()


def init_kmeanspp(points: np.ndarray, k: int, state: GeneratorState) -> np.ndarray:
    """D^2 sampling with cumulative weights accumulated in point-index order.

    ``total`` is the plain left-to-right running sum of the weights. A draw
    ``u * total`` picks the first point whose running weight exceeds it.
    If every remaining weight is zero (fewer distinct points than ``k``), the
    next center is a uniform draw among points not yet chosen.
    """
    n = points.shape[0]
    first, state = rng.bounded(state, n)
    chosen = [first]
    closest = point_costs(points, points[[first]], np.zeros(n, dtype=np.int64))
    while len(chosen) < k:
        running = np.add.accumulate(closest)
        total = float(running[-1])
        if total > 0.0:
            u, state = rng.next_double(state)
            target = u * total
            idx = int(np.searchsorted(running, target, side="right"))
            idx = min(idx, n - 1)
            while closest[idx] == 0.0:
                idx -= 1
        else:
            taken = set(chosen)
            free = [i for i in range(n) if i not in taken]
            pick, state = rng.bounded(state, len(free))
            idx = free[pick]
        chosen.append(idx)
        d_new = point_costs(points, points[[idx]], np.zeros(n, dtype=np.int64))
        closest = np.minimum(closest, d_new)
    return points[chosen].copy()


def lloyd(points: np.ndarray, init_centers: np.ndarray, max_iter: int,
          chunk_size: int = DEFAULT_CHUNK_SIZE, worker_count: int = 1,
          track_inertia: bool = False) -> tuple[np.ndarray, np.ndarray, int, list[float]]:
    """Alternate assign/update until the labels stop changing.

    Returns ``(centers, labels, n_iter, trace)``; ``trace`` holds the inertia
    after each update (and repair) when ``track_inertia`` is set.
    """
    k = init_centers.shape[0]
    centers = np.array(init_centers, dtype=np.float64, copy=True)
    previous: np.ndarray | None = None
    trace: list[float] = []
    labels = np.zeros(points.shape[0], dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels = assign(points, centers, worker_count)
        centers, empty = update(points, labels, k, centers, chunk_size)
        repaired = bool(empty.any())
        if repaired:
            labels, centers = repair_empty(points, labels, centers, empty)
        if track_inertia:
            trace.append(_inertia(points, centers, labels, chunk_size, worker_count))
        if not repaired and previous is not None and np.array_equal(labels, previous):
            break
        previous = labels
    return centers, labels, n_iter, trace


def kmeans_fit(data: Dataset | np.ndarray, params: KMeansParams, worker_count: int = 1,
               track_inertia: bool = False) -> KMeansResult:
    points = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    n = points.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    if params.k > n:
        raise ValueError(f"k={params.k} exceeds the number of points n={n}")

    best: tuple[float, int, np.ndarray, np.ndarray, int, list[float]] | None = None
    restart_inertias = []
    for r in range(params.n_init):
        sub = rng.substream(params.state, TAG_KMEANS_INIT, r)
        if params.init_method == "kmeans++":
            init = init_kmeanspp(points, params.k, sub)
        else:
            init = init_random_points(points, params.k, sub)
        centers, labels, n_iter, trace = lloyd(
            points, init, params.max_iter, params.chunk_size, worker_count, track_inertia
        )
        value = _inertia(points, centers, labels, params.chunk_size, worker_count)
        restart_inertias.append(value)
        # strict < keeps the lowest restart index on exact ties
        if best is None or value < best[0]:
            best = (value, r, centers, labels, n_iter, trace)
    assert best is not None
    value, r, centers, labels, n_iter, trace = best
    centers.setflags(write=False)
    labels.setflags(write=False)
    return KMeansResult(
        centers=centers,
        labels=labels,
        inertia=value,
        best_init_index=r,
        n_iter=n_iter,
        params_echo=params,
        restart_inertias=tuple(restart_inertias),
        inertia_trace=tuple(trace) if track_inertia else None,
    )
