"""Counter-based random numbers (Philox4x64-10) with explicit, immutable state.

A :class:`GeneratorState` is a 128-bit key plus a 128-bit counter. Each draw
encrypts the current counter with the key and advances the counter by one
block position; the block's first 64-bit word is the output. Nothing else is
hidden, so a state printed in a record replays the exact same stream.

Block layout: the 256-bit Philox counter is ``(counter_lo64, counter_hi64, 0, 0)``
and the Philox key is ``(key_lo64, key_hi64)``.

Substreams live in the high 64 bits of the counter. ``substream(s, tag, i)``
adds ``(1 + tag * 2**48 + i) << 64`` to the counter of ``s``, so every
``(tag, i)`` pair owns its own block of ``2**64`` counter positions, disjoint
from the parent's stream and from its siblings.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

MASK64 = (1 << 64) - 1
MASK128 = (1 << 128) - 1

PHILOX_M0 = 0xD2E7470EE14C6C93
PHILOX_M1 = 0xCA5A826395121157
PHILOX_W0 = 0x9E3779B97F4A7C15
PHILOX_W1 = 0xBB67AE8584CAA73B
PHILOX_ROUNDS = 10

TAG_BITS = 15
INDEX_BITS = 48

# Seed expansion constants (splitmix64 increments and finalizer).
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15

_STATE_RE = re.compile(r"^[0-9a-f]{32}:[0-9a-f]{32}$")


def philox4x64(counter: tuple[int, int, int, int], key: tuple[int, int],
               rounds: int = PHILOX_ROUNDS) -> tuple[int, int, int, int]:
    """One Philox4x64 block. Pure integer arithmetic, no platform dependence."""
    c0, c1, c2, c3 = counter
    k0, k1 = key
    for r in range(rounds):
        if r:
            k0 = (k0 + PHILOX_W0) & MASK64
            k1 = (k1 + PHILOX_W1) & MASK64
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        c0, c1, c2, c3 = (
            ((p1 >> 64) ^ c1 ^ k0) & MASK64,
            p1 & MASK64,
            ((p0 >> 64) ^ c3 ^ k1) & MASK64,
            p0 & MASK64,
        )
    return c0, c1, c2, c3


def splitmix64(x: int) -> int:
    z = (x + _SPLITMIX_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class GeneratorState:
    key: int
    counter: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.key <= MASK128:
            raise ValueError("key must be a 128-bit unsigned integer")
        if not 0 <= self.counter <= MASK128:
            raise ValueError("counter must be a 128-bit unsigned integer")

    @classmethod
    def from_seed(cls, seed: int) -> "GeneratorState":
        """Expand a convenience integer seed into a full state.

        ``seed`` is reduced to 64 bits (two's complement for negatives), then
        ``key_lo = splitmix64(seed)``, ``key_hi = splitmix64(key_lo)`` and the
        counter starts at zero. ``splitmix64`` is a bijection on 64-bit
        integers, so distinct 64-bit seeds give distinct keys.
        """
        s = seed & MASK64
        lo = splitmix64(s)
        hi = splitmix64(lo)
        return cls(key=(hi << 64) | lo, counter=0)

    def to_hex(self) -> str:
        return f"{self.key:032x}:{self.counter:032x}"

    @classmethod
    def from_hex(cls, text: str) -> "GeneratorState":
        if not _STATE_RE.match(text):
            raise ValueError(f"malformed generator state {text!r}; expected 32hex:32hex")
        key, counter = text.split(":")
        return cls(int(key, 16), int(counter, 16))

    def __str__(self) -> str:
        return self.to_hex()


def block(state: GeneratorState) -> tuple[int, int, int, int]:
    ctr = state.counter
    key = state.key
    return philox4x64((ctr & MASK64, ctr >> 64, 0, 0), (key & MASK64, key >> 64))


def next_u64(state: GeneratorState) -> tuple[int, GeneratorState]:
    value = block(state)[0]
    return value, GeneratorState(state.key, (state.counter + 1) & MASK128)


def next_double(state: GeneratorState) -> tuple[float, GeneratorState]:
    """Uniform in [0, 1): top 53 bits of one u64, scaled by 2**-53 (exact)."""
    value, state = next_u64(state)
    return (value >> 11) * 2.0**-53, state


def substream(state: GeneratorState, purpose_tag: int, index: int) -> GeneratorState:
    if not 0 <= purpose_tag < (1 << TAG_BITS):
        raise OverflowError(f"purpose_tag {purpose_tag} outside [0, 2**{TAG_BITS})")
    if not 0 <= index < (1 << INDEX_BITS):
        raise OverflowError(f"index {index} outside [0, 2**{INDEX_BITS})")
    offset = (1 + (purpose_tag << INDEX_BITS) + index) << 64
    return GeneratorState(state.key, (state.counter + offset) & MASK128)


def bounded(state: GeneratorState, n: int) -> tuple[int, GeneratorState]:
    """Unbiased integer in [0, n) by rejection on the top of the 64-bit range."""
    if not 1 <= n <= (1 << 64):
        raise ValueError(f"bound must be in [1, 2**64], got {n}")
    limit = (1 << 64) - ((1 << 64) % n)
    while True:
        value, state = next_u64(state)
        if value < limit:
            return value % n, state


def uniform_indices(state: GeneratorState, n: int, k: int) -> tuple[list[int], GeneratorState]:
    """``k`` distinct indices in [0, n), in draw order; duplicates are redrawn."""
    if n < 1 or k < 1:
        raise ValueError(f"n and k must be positive, got n={n}, k={k}")
    if k > n:
        raise ValueError(f"cannot draw {k} distinct indices from {n}")
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < k:
        idx, state = bounded(state, n)
        if idx not in seen:
            seen.add(idx)
            chosen.append(idx)
    return chosen, state


def normal_pair(state: GeneratorState) -> tuple[float, float, GeneratorState]:
    """Two standard normals by Box-Muller.

    ``u1, u2`` are two consecutive uniform draws. ``r = sqrt(-2 * log(1 - u1))``
    (``1 - u1`` lies in (0, 1], so the log is finite), ``theta = 2*pi*u2``,
    and the pair is ``(r * cos(theta), r * sin(theta))``.
    """
    u1, state = next_double(state)
    u2, state = next_double(state)
    return (*box_muller(u1, u2), state)


def box_muller(u1: float, u2: float) -> tuple[float, float]:
    r = math.sqrt(-2.0 * math.log(1.0 - u1))
    theta = 2.0 * math.pi * u2
    return r * math.cos(theta), r * math.sin(theta)


def as_state(value: "GeneratorState | int | str") -> GeneratorState:
    """Accept a state, a convenience seed, or a serialized ``key:counter`` string."""
    if isinstance(value, GeneratorState):
        return value
    if isinstance(value, bool):
        raise TypeError("a bool is not a seed")
    if isinstance(value, int):
        return GeneratorState.from_seed(value)
    if isinstance(value, str):
        return GeneratorState.from_hex(value)
    raise TypeError(f"cannot build a generator state from {type(value).__name__}")
