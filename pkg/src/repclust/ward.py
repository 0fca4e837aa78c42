"""Agglomerative clustering driven by the mean squared deviation of merged clusters.

At every step the pair minimizing

    (1 / |q_ij|) * sum_{x in q_ij} ||x - center(q_ij)||^2

is merged. This is the literal merged-cluster MSE, not classical Ward's
increase in SSE, and the two can disagree on dendrograms.

Each cluster carries its size, coordinate sum and within-cluster sum of
squared deviations ``sse``. Merging uses the pairwise update

    sse_ab = sse_a + sse_b + (n_a * n_b) * ||mean_a - mean_b||^2 / n_ab
    MSE    = sse_ab / n_ab

with ``mean = coord_sum / n`` and the norm accumulated in dimension order.
Every term is non-negative, so there is no cancellation. The tempting form
``(sqnorm_a + sqnorm_b) / n_ab - ||mean_ab||^2`` loses about
``||mean||^2 / MSE`` ulps on tight clusters far from the origin, which is
enough to pick a different pair on desk-sized random data.

Exact ties go to the lexicographically smallest ``(id_a, id_b)``. Point ``i``
starts as cluster ``i``; the cluster created at step ``s`` gets id ``n + s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class ClusterAccumulator:
    id: int
    member_count: int
    coord_sum: np.ndarray
    sse: float

    @property
    def center(self) -> np.ndarray:
        return self.coord_sum / self.member_count

    @classmethod
    def singleton(cls, id: int, x) -> "ClusterAccumulator":
        return cls(id, 1, np.array(x, dtype=np.float64).reshape(-1), 0.0)

    def merged_sse(self, other: "ClusterAccumulator") -> float:
        lo, hi = (self, other) if self.id < other.id else (other, self)
        n_lo, n_hi = lo.member_count, hi.member_count
        gap = 0.0
        for a, b in zip(lo.center.tolist(), hi.center.tolist()):
            gap = gap + (a - b) * (a - b)
        return (lo.sse + hi.sse) + float(n_lo * n_hi) * gap / float(n_lo + n_hi)

    def merged_mse(self, other: "ClusterAccumulator") -> float:
        return self.merged_sse(other) / float(self.member_count + other.member_count)

    def merge(self, other: "ClusterAccumulator", new_id: int) -> "ClusterAccumulator":
        lo, hi = (self, other) if self.id < other.id else (other, self)
        return ClusterAccumulator(new_id, lo.member_count + hi.member_count,
                                  lo.coord_sum + hi.coord_sum, self.merged_sse(other))


@dataclass(frozen=True)
class WardResult:
    n: int
    merges: tuple[tuple[int, int, float, int], ...]

    def as_array(self) -> np.ndarray:
        """Linkage-style ``(n-1) x 4`` float matrix."""
        return np.array(self.merges, dtype=np.float64).reshape(-1, 4)


def _row_sse(counts, sums, sse, s: int, others: np.ndarray) -> np.ndarray:
    """Merged SSE of slot ``s`` with each slot in ``others``; same op order as the scalar form."""
    gap = np.zeros(others.shape[0], dtype=np.float64)
    for j in range(sums.shape[1]):
        diff = sums[others, j] / counts[others] - sums[s, j] / counts[s]
        gap = gap + diff * diff
    weight = (counts[others] * counts[s]).astype(np.float64)
    return (sse[others] + sse[s]) + weight * gap / (counts[others] + counts[s]).astype(np.float64)


def ward_fit(data: Dataset | np.ndarray) -> WardResult:
    points = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    n, d = points.shape
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")

    counts = np.ones(n, dtype=np.int64)
    sums = np.array(points, dtype=np.float64, copy=True)
    sse = np.zeros(n, dtype=np.float64)
    slot_id = np.arange(n, dtype=np.int64)

    # pair table of merged SSE over slots; dead slots and the diagonal hold +inf.
    # Minimizing MSE = SSE / size needs the division, so the table stores MSE.
    table = np.full((n, n), np.inf, dtype=np.float64)
    all_slots = np.arange(n)
    for s in range(n - 1):
        others = all_slots[s + 1 :]
        table[s, others] = _row_sse(counts, sums, sse, s, others) / 2.0
    lower = np.tril_indices(n)
    table[lower] = table.T[lower]
    np.fill_diagonal(table, np.inf)

    # row_min[s] caches min(table[s]); only rows touching a changed column are rescanned
    row_min = table.min(axis=1)
    live = np.ones(n, dtype=bool)
    merges: list[tuple[int, int, float, int]] = []
    for step in range(n - 1):
        best = row_min.min()
        cand = np.flatnonzero(row_min == best)
        r_idx, cols = np.nonzero(table[cand] == best)
        rows = cand[r_idx]
        a_ids = np.minimum(slot_id[rows], slot_id[cols])
        b_ids = np.maximum(slot_id[rows], slot_id[cols])
        pick = np.lexsort((b_ids, a_ids))[0]
        sa, sb = int(rows[pick]), int(cols[pick])
        id_a, id_b = int(a_ids[pick]), int(b_ids[pick])
        if slot_id[sa] != id_a:
            sa, sb = sb, sa

        size = int(counts[sa] + counts[sb])
        merges.append((id_a, id_b, float(best), size))

        # merged cluster lives in slot sa; operand order: lower id first
        sse[sa] = _row_sse(counts, sums, sse, sa, np.array([sb]))[0]
        counts[sa] = size
        sums[sa] = sums[sa] + sums[sb]
        slot_id[sa] = n + step
        live[sb] = False
        others = np.flatnonzero(live)
        others = others[others != sa]
        stale = others[(table[others, sa] == row_min[others]) | (table[others, sb] == row_min[others])]
        table[sb, :] = np.inf
        table[:, sb] = np.inf
        row_min[sb] = np.inf

        if others.shape[0]:
            row = _row_sse(counts, sums, sse, sa, others) / (counts[others] + size).astype(np.float64)
            table[sa, others] = row
            table[others, sa] = row
            row_min[sa] = row.min()
            row_min[others] = np.minimum(row_min[others], row)
            if stale.shape[0]:
                row_min[stale] = table[stale].min(axis=1)
        else:
            row_min[sa] = np.inf
    return WardResult(n=n, merges=tuple(merges))


def ward_labels(result: WardResult, k: int) -> np.ndarray:
    """Flat labels for ``k`` clusters, numbered by their smallest point index."""
    n = result.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    parent = list(range(2 * n - 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step, (a, b, _, _) in enumerate(result.merges[: n - k]):
        parent[find(a)] = n + step
        parent[find(b)] = n + step

    labels = np.empty(n, dtype=np.int64)
    ids: dict[int, int] = {}
    for i in range(n):
        root = find(i)
        if root not in ids:
            ids[root] = len(ids)
        labels[i] = ids[root]
    return labels
