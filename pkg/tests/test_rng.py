import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from repclust import rng
from repclust.rng import GeneratorState

MASK64 = (1 << 64) - 1

# Philox4x64-10 known-answer vectors (Random123 kat_vectors).
KAT = [
    ((0, 0, 0, 0), (0, 0),
     (0x16554D9ECA36314C, 0xDB20FE9D672D0FDC, 0xD7E772CEE186176B, 0x7E68B68AEC7BA23B)),
    ((MASK64,) * 4, (MASK64, MASK64),
     (0x87B092C3013FE90B, 0x438C3C67BE8D0224, 0x9CC7D7C69CD777B6, 0xA09CAEBF594F0BA0)),
    ((0x243F6A8885A308D3, 0x13198A2E03707344, 0xA4093822299F31D0, 0x082EFA98EC4E6C89),
     (0x452821E638D01377, 0xBE5466CF34E90C6C),
     (0xA528F45403E61D95, 0x38C72DBD566E9788, 0xA5A1610E72FD18B5, 0x57BD43B5E52B7FE6)),
]

u64s = st.integers(0, MASK64)
states = st.builds(GeneratorState, st.integers(0, (1 << 128) - 1), st.integers(0, (1 << 128) - 1))


@pytest.mark.parametrize("ctr,key,expected", KAT)
def test_known_answer_vectors(ctr, key, expected):
    assert rng.philox4x64(ctr, key) == expected


@given(st.tuples(u64s, u64s, u64s, u64s), st.tuples(u64s, u64s))
def test_block_matches_numpy_philox(ctr, key):
    # numpy's Philox increments its counter before each block, so start one behind
    bg = np.random.Philox(key=np.array(key, dtype=np.uint64))
    c = (ctr[0] | ctr[1] << 64 | ctr[2] << 128 | ctr[3] << 192) - 1
    c %= 1 << 256
    st_ = bg.state
    st_["state"]["counter"] = np.array([(c >> (64 * i)) & MASK64 for i in range(4)], dtype=np.uint64)
    st_["buffer_pos"] = 4
    bg.state = st_
    assert tuple(int(v) for v in bg.random_raw(4)) == rng.philox4x64(ctr, key)


@given(states)
def test_next_u64_is_pure(state):
    assert rng.next_u64(state) == rng.next_u64(state)


@given(states)
def test_consecutive_counters(state):
    v0, s1 = rng.next_u64(state)
    v1, _ = rng.next_u64(s1)
    assert s1.counter == (state.counter + 1) % (1 << 128)
    assert v1 == rng.next_u64(GeneratorState(state.key, s1.counter))[0]
    assert v0 == rng.block(state)[0]


@given(states)
def test_hex_round_trip_replays_stream(state):
    text = state.to_hex()
    assert len(text) == 65 and text[32] == ":" and text == text.lower()
    again = GeneratorState.from_hex(text)
    assert again == state
    a, b = state, again
    for _ in range(5):
        x, a = rng.next_u64(a)
        y, b = rng.next_u64(b)
        assert x == y


@pytest.mark.parametrize("bad", ["", "00:00", "g" * 32 + ":" + "0" * 32, "0" * 32 + "0" * 33])
def test_from_hex_rejects_malformed(bad):
    with pytest.raises(ValueError):
        GeneratorState.from_hex(bad)


def test_seed_expansion_is_documented_splitmix():
    s = GeneratorState.from_seed(42)
    lo = rng.splitmix64(42)
    assert s.key == (rng.splitmix64(lo) << 64) | lo
    assert s.counter == 0
    # splitmix64 reference value for input 0 (first output of the seed-0 sequence)
    assert rng.splitmix64(0) == 0xE220A8397B1DCDAF


@given(u64s, u64s)
def test_distinct_seeds_distinct_keys(a, b):
    if a != b:
        assert GeneratorState.from_seed(a).key != GeneratorState.from_seed(b).key


def test_next_double_range_and_resolution():
    s = GeneratorState.from_seed(5)
    for _ in range(1000):
        u, s = rng.next_double(s)
        assert 0.0 <= u < 1.0
        assert u * 2**53 == int(u * 2**53)


class TestSubstream:
    def test_pure(self):
        s = GeneratorState.from_seed(1)
        assert rng.substream(s, 3, 9) == rng.substream(s, 3, 9)

    def test_injective(self):
        s = GeneratorState.from_seed(1)
        assert rng.substream(s, 0, 0) != rng.substream(s, 0, 1)
        assert rng.substream(s, 0, 1) != rng.substream(s, 1, 0)

    def test_counter_ranges_disjoint(self):
        s = GeneratorState.from_seed(7)
        a, b = rng.substream(s, 0, 0), rng.substream(s, 0, 1)
        used_a = {(a.counter + i) % (1 << 128) for i in range(100_000)}
        used_b = {(b.counter + i) % (1 << 128) for i in range(100_000)}
        parent = {(s.counter + i) % (1 << 128) for i in range(100_000)}
        assert not used_a & used_b
        assert not (used_a | used_b) & parent
        # walking the streams visits exactly these positions
        x = a
        for _ in range(3):
            _, x = rng.next_u64(x)
        assert x.counter - a.counter == 3

    @pytest.mark.parametrize("tag,index", [(-1, 0), (1 << 15, 0), (0, -1), (0, 1 << 48)])
    def test_range_overflow(self, tag, index):
        with pytest.raises(OverflowError):
            rng.substream(GeneratorState.from_seed(0), tag, index)

    @given(st.integers(0, (1 << 15) - 1), st.integers(0, (1 << 48) - 1),
           st.integers(0, (1 << 15) - 1), st.integers(0, (1 << 48) - 1))
    def test_offsets_injective(self, t1, i1, t2, i2):
        s = GeneratorState(0, 0)
        same = rng.substream(s, t1, i1) == rng.substream(s, t2, i2)
        assert same == ((t1, i1) == (t2, i2))


class TestBoundedAndIndices:
    def test_chi_square_three_bins(self):
        s = GeneratorState.from_seed(2024)
        counts = [0, 0, 0]
        for _ in range(300_000):
            v, s = rng.bounded(s, 3)
            counts[v] += 1
        expected = 100_000
        chi2 = sum((c - expected) ** 2 / expected for c in counts)
        # two degrees of freedom: the survival function is exp(-x/2)
        assert math.exp(-chi2 / 2) > 0.001

    def test_rejection_threshold(self):
        # a draw at or above 2**64 - (2**64 mod n) must be redrawn
        n = 3
        limit = (1 << 64) - ((1 << 64) % n)
        s = GeneratorState.from_seed(0)
        for _ in range(200):
            raw, nxt = rng.next_u64(s)
            v, after = rng.bounded(s, n)
            if raw < limit:
                assert (v, after) == (raw % n, nxt)
            s = nxt

    def test_single(self):
        assert rng.uniform_indices(GeneratorState.from_seed(0), 1, 1)[0] == [0]

    def test_exhaustion_is_permutation(self):
        idx, _ = rng.uniform_indices(GeneratorState.from_seed(3), 20, 20)
        assert sorted(idx) == list(range(20))

    def test_deterministic(self):
        s = GeneratorState.from_seed(9)
        assert rng.uniform_indices(s, 100, 5) == rng.uniform_indices(s, 100, 5)

    @given(states, st.integers(1, 50).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))))
    def test_distinct_in_range(self, state, nk):
        n, k = nk
        idx, _ = rng.uniform_indices(state, n, k)
        assert len(idx) == k == len(set(idx))
        assert all(0 <= i < n for i in idx)

    def test_k_greater_than_n(self):
        with pytest.raises(ValueError):
            rng.uniform_indices(GeneratorState.from_seed(0), 3, 4)


class TestNormal:
    def test_pure(self):
        s = GeneratorState.from_seed(4)
        assert rng.normal_pair(s) == rng.normal_pair(s)

    def test_hand_evaluated_transform(self):
        # u1 = 1 - e^-2  ->  r = sqrt(-2 log(e^-2)) = 2; u2 = 0.25 -> theta = pi/2
        u1 = 1.0 - math.exp(-2.0)
        z0, z1 = rng.box_muller(u1, 0.25)
        assert z1 == pytest.approx(2.0, rel=1e-15)
        assert abs(z0) < 1e-15
        z0, z1 = rng.box_muller(0.0, 0.0)
        assert (z0, z1) == (0.0, 0.0)

    def test_uses_two_consecutive_uniforms(self):
        s = GeneratorState.from_seed(8)
        u1, s1 = rng.next_double(s)
        u2, s2 = rng.next_double(s1)
        z0, z1, after = rng.normal_pair(s)
        assert (z0, z1) == rng.box_muller(u1, u2)
        assert after == s2

    def test_moments(self):
        s = GeneratorState.from_seed(12345)
        out = np.empty(200_000)
        for i in range(0, out.size, 2):
            out[i], out[i + 1], s = rng.normal_pair(s)
        assert abs(out.mean()) < 0.02
        assert abs(out.var() - 1.0) < 0.02


def test_as_state():
    s = GeneratorState.from_seed(3)
    assert rng.as_state(s) is s
    assert rng.as_state(3) == s
    assert rng.as_state(s.to_hex()) == s
    with pytest.raises(TypeError):
        rng.as_state(True)
    with pytest.raises(TypeError):
        rng.as_state(1.5)
