from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from repclust.metrics import adjusted_rand_index, contingency, inertia

labelings = st.integers(1, 40).flatmap(
    lambda n: st.tuples(st.lists(st.integers(-1, 5), min_size=n, max_size=n),
                        st.lists(st.integers(-1, 5), min_size=n, max_size=n)))


def ari_fraction(a, b) -> Fraction:
    """ARI in exact rational arithmetic from the textbook definition."""
    t = contingency(a, b)
    index = sum(comb(int(v), 2) for v in t.counts.ravel())
    sa = sum(comb(int(v), 2) for v in t.row_sums)
    sb = sum(comb(int(v), 2) for v in t.col_sums)
    total = comb(len(a), 2)
    if total == 0:
        return Fraction(1)
    expected = Fraction(sa * sb, total)
    maximum = Fraction(sa + sb, 2)
    if maximum == expected:
        return Fraction(1)
    return (index - expected) / (maximum - expected)


class TestInertia:
    def test_on_centers(self):
        pts = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert inertia(pts, pts, [0, 1]) == 0.0

    def test_converged_example(self):
        assert inertia(np.array([[0.0], [2.0], [10.0], [12.0]]), np.array([[1.0], [11.0]]),
                       [0, 0, 1, 1]) == 4.0

    def test_single_point(self):
        assert inertia(np.array([[3.0]]), np.array([[0.0]]), [0]) == 9.0

    def test_bad_labels(self):
        with pytest.raises(ValueError):
            inertia(np.zeros((2, 1)), np.zeros((1, 1)), [0, 1])
        with pytest.raises(ValueError):
            inertia(np.zeros((2, 1)), np.zeros((1, 1)), [0])

    def test_thread_invariant(self):
        g = np.random.default_rng(0)
        pts = g.random((20_000, 3))
        centers = g.random((5, 3))
        labels = g.integers(0, 5, 20_000)
        ref = inertia(pts, centers, labels, 512, 1)
        for t in (2, 4, 8, 16):
            assert inertia(pts, centers, labels, 512, t).hex() == ref.hex()


class TestARI:
    def test_hand_example_exact(self):
        got = adjusted_rand_index([0, 0, 1, 1], [0, 0, 1, 2])
        assert got == 4 / 7
        assert got == 0.5714285714285714

    def test_identity_and_permutation(self):
        a = [0, 0, 1, 1, 2, 2, 2]
        assert adjusted_rand_index(a, a) == 1.0
        assert adjusted_rand_index(a, [5, 5, 9, 9, 1, 1, 1]) == 1.0

    def test_both_trivial(self):
        assert adjusted_rand_index([0, 0, 0], [1, 1, 1]) == 1.0
        assert adjusted_rand_index([4], [7]) == 1.0

    def test_noise_counts_as_a_cluster(self):
        assert adjusted_rand_index([-1, -1, 0, 0], [3, 3, 0, 0]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            adjusted_rand_index([0, 1], [0])

    @given(labelings)
    def test_equals_exact_rational(self, ab):
        a, b = ab
        assert adjusted_rand_index(a, b) == float(ari_fraction(a, b))

    @given(labelings)
    def test_symmetric(self, ab):
        a, b = ab
        assert adjusted_rand_index(a, b) == adjusted_rand_index(b, a)

    @given(labelings, st.permutations(range(-1, 6)), st.permutations(range(-1, 6)))
    def test_relabel_invariant(self, ab, pa, pb):
        a, b = ab
        ma = {k: v for k, v in zip(range(-1, 6), pa)}
        mb = {k: v for k, v in zip(range(-1, 6), pb)}
        assert adjusted_rand_index([ma[x] for x in a], [mb[x] for x in b]) == adjusted_rand_index(a, b)

    def test_random_labelings_near_zero(self):
        g = np.random.default_rng(7)
        scores = [adjusted_rand_index(g.integers(0, 5, 1000), g.integers(0, 5, 1000))
                  for _ in range(100)]
        assert max(abs(s) for s in scores) < 0.05

    def test_large_counts_stay_exact(self):
        # pair counts far beyond 2**53 still give a correctly rounded result
        n = 3_000_000
        a = np.repeat([0, 1], n // 2)
        b = np.concatenate([np.zeros(n // 2 + 1, dtype=int), np.ones(n // 2 - 1, dtype=int)])
        assert adjusted_rand_index(a, b) == float(ari_fraction(a, b))


def test_contingency_sums():
    t = contingency([0, 0, 1, 2], [1, 1, 1, 0])
    assert t.counts.sum() == t.n == 4
    assert t.row_sums.tolist() == [2, 1, 1]
    assert t.col_sums.tolist() == [1, 3]
