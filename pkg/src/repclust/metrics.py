"""Inertia and Adjusted Rand Index."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detnum import ReductionPlan, fixed_sum, sq_distances_to, DEFAULT_CHUNK_SIZE


def inertia(points, centers, labels, chunk_size: int = DEFAULT_CHUNK_SIZE,
            worker_count: int = 1) -> float:
    """Sum of squared distances of each point to its assigned center, in fixed order."""
    points = np.asarray(points, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if centers.ndim == 1:
        centers = centers.reshape(-1, 1)
    if labels.shape[0] != points.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for {points.shape[0]} points")
    if labels.size and (labels.min() < 0 or labels.max() >= centers.shape[0]):
        raise ValueError("labels out of range for centers")
    per_point = point_costs(points, centers, labels)
    return fixed_sum(per_point, ReductionPlan(per_point.shape[0], chunk_size), worker_count,
                     fault_site=True)


def point_costs(points: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> np.ndarray:
    # same per-element operation sequence as detnum.sq_euclidean
    assigned = centers[labels]
    acc = np.zeros(points.shape[0], dtype=np.float64)
    for j in range(points.shape[1]):
        diff = points[:, j] - assigned[:, j]
        acc = acc + diff * diff
    return acc


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray
    row_sums: np.ndarray
    col_sums: np.ndarray
    n: int


def contingency(labels_a, labels_b) -> ContingencyTable:
    a = np.asarray(labels_a, dtype=np.int64).reshape(-1)
    b = np.asarray(labels_b, dtype=np.int64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    counts = np.zeros((ua.shape[0], ub.shape[0]), dtype=np.int64)
    np.add.at(counts, (ia, ib), 1)
    return ContingencyTable(counts, counts.sum(axis=1), counts.sum(axis=0), int(a.shape[0]))


def _pairs(values) -> int:
    return sum(int(v) * (int(v) - 1) // 2 for v in np.asarray(values).ravel())


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Adjusted Rand Index with exact integer pair counts.

    Noise labels (``-1``) are an ordinary cluster here. With
    ``index = sum C(n_uv, 2)``, ``A = sum C(a_u, 2)``, ``B = sum C(b_v, 2)`` and
    ``N = C(n, 2)`` the score is

        2 (index*N - A*B) / ((A + B)*N - 2*A*B)

    evaluated as one correctly rounded integer division. Returns 1.0 when the
    denominator vanishes (both partitions trivial).
    """
    table = contingency(labels_a, labels_b)
    if table.n < 1:
        raise ValueError("labelings must be non-empty")
    # Python ints: no overflow is possible in the pair counts
    index = _pairs(table.counts)
    sum_a = _pairs(table.row_sums)
    sum_b = _pairs(table.col_sums)
    total = table.n * (table.n - 1) // 2
    num = 2 * (index * total - sum_a * sum_b)
    den = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return num / den
