import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from repclust.data import Dataset
from repclust.ward import ClusterAccumulator, WardResult, ward_fit, ward_labels

from oracles import RawWard, raw_mse


def col(*v):
    return np.array(v, dtype=np.float64).reshape(-1, 1)


class TestExamples:
    def test_three_points(self):
        r = ward_fit(col(0, 1, 5))
        assert r.merges == ((0, 1, 0.25, 2), (2, 3, 4.666666666666667, 3))

    def test_exact_tie_smallest_pair(self):
        r = ward_fit(col(0, 1, 10, 11))
        assert r.merges[0] == (0, 1, 0.25, 2)
        assert r.merges[1] == (2, 3, 0.25, 2)
        assert r.merges[2][:2] == (4, 5)

    def test_tie_among_later_ids(self):
        # equal gaps everywhere: every adjacent pair ties at 0.25
        r = ward_fit(col(0, 1, 2, 3))
        assert r.merges[0][:2] == (0, 1)

    def test_two_points(self):
        assert ward_fit(col(3, 7)).merges == ((0, 1, 4.0, 2),)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            ward_fit(col(1))

    def test_accepts_dataset(self):
        assert ward_fit(Dataset(col(0, 1, 5))).merges == ward_fit(col(0, 1, 5)).merges

    def test_identical_singletons_merge_at_zero(self):
        x = np.array([[0.1, 1 / 3, 7.7]] * 2 + [[5.0, 5.0, 5.0]])
        assert ward_fit(x).merges[0] == (0, 1, 0.0, 2)


class TestAccumulator:
    def test_center_and_merge(self):
        a = ClusterAccumulator.singleton(0, [0.0])
        b = ClusterAccumulator.singleton(1, [1.0])
        ab = a.merge(b, 3)
        assert (ab.id, ab.member_count, ab.center.tolist(), ab.sse) == (3, 2, [0.5], 0.5)
        c = ClusterAccumulator.singleton(2, [5.0])
        assert ab.merged_mse(c) == 4.666666666666667
        assert ab.merged_mse(c) == c.merged_mse(ab)

    @settings(max_examples=50)
    @given(st.lists(st.lists(st.floats(-100, 100), min_size=2, max_size=2), min_size=2, max_size=12),
           st.integers(1, 11))
    def test_against_raw(self, rows, cut):
        cut = min(cut, len(rows) - 1)
        left = ClusterAccumulator.singleton(0, rows[0])
        for i in range(1, cut):
            left = left.merge(ClusterAccumulator.singleton(i, rows[i]), 100 + i)
        right = ClusterAccumulator.singleton(cut, rows[cut])
        for i in range(cut + 1, len(rows)):
            right = right.merge(ClusterAccumulator.singleton(i, rows[i]), 200 + i)
        want = raw_mse(rows, list(range(len(rows))))
        assert left.merged_mse(right) == pytest.approx(want, rel=1e-9, abs=1e-9)
        assert left.merged_mse(right) >= 0.0


class TestLabels:
    def test_cuts(self):
        r = ward_fit(col(0, 1, 5))
        assert ward_labels(r, 1).tolist() == [0, 0, 0]
        assert ward_labels(r, 2).tolist() == [0, 0, 1]
        assert ward_labels(r, 3).tolist() == [0, 1, 2]

    def test_numbered_by_smallest_point(self):
        r = ward_fit(col(10, 0, 11, 1))
        assert ward_labels(r, 2).tolist() == [0, 1, 0, 1]

    @pytest.mark.parametrize("k", [0, 4])
    def test_out_of_range(self, k):
        with pytest.raises(ValueError):
            ward_labels(ward_fit(col(0, 1, 5)), k)


class TestProperties:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32), st.integers(2, 40), st.integers(1, 3))
    def test_structure(self, seed, n, d):
        x = np.round(np.random.default_rng(seed).random((n, d)) * 8) / 8
        r = ward_fit(x)
        assert len(r.merges) == n - 1
        sizes = {i: 1 for i in range(n)}
        for step, (a, b, v, size) in enumerate(r.merges):
            assert a < b and a in sizes and b in sizes
            assert size == sizes.pop(a) + sizes.pop(b)
            assert v >= 0.0
            sizes[n + step] = size
        assert list(sizes.values()) == [n]
        assert r.as_array().shape == (n - 1, 4)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32), st.integers(2, 40))
    def test_run_to_run(self, seed, n):
        x = np.random.default_rng(seed).random((n, 2))
        assert ward_fit(x).merges == ward_fit(x.copy()).merges

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32), st.integers(2, 30), st.integers(1, 3))
    def test_matches_raw_reference(self, seed, n, d):
        x = np.random.default_rng(seed).random((n, d))
        ref = RawWard(x)
        for a, b, v, _ in ward_fit(x).merges:
            cands = ref.candidates()
            top = cands[0]
            if len(cands) > 1 and cands[1][0] - top[0] > 1e-9 * abs(cands[1][0]):
                assert (a, b) == top[1:]
            assert v == pytest.approx(ref.scores[(a, b)], rel=1e-9, abs=1e-300)
            ref.merge(a, b)


def test_result_is_frozen():
    r = WardResult(2, ((0, 1, 0.0, 2),))
    with pytest.raises(AttributeError):
        r.n = 3
