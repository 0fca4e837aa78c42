"""Canonical byte encodings of result facets and their sha256 fingerprints.

Every stream starts with a one-byte facet tag. Floats are written as their
8-byte IEEE-754 bit patterns, integers as 8-byte two's complement, both
big-endian and in row-major order. ``0.0`` and ``-0.0`` therefore encode
differently, as do any two floats that differ in a single bit.
"""

from __future__ import annotations

import hashlib
import struct
from typing import Any

import numpy as np

FACET_TAGS = {
    "centers": 0x01,
    "labels": 0x02,
    "inertia": 0x03,
    "best_init": 0x04,
    "merge-list": 0x05,
    "dbscan-labels": 0x06,
}


def _f8(values) -> bytes:
    return np.ascontiguousarray(values, dtype=np.float64).astype(">f8").tobytes()


def _i8(values) -> bytes:
    return np.ascontiguousarray(values, dtype=np.int64).astype(">i8").tobytes()


def canonical_bytes(facet: str, value: Any) -> bytes:
    """Encode one facet.

    ``centers``: float matrix. ``labels``: int vector. ``inertia``: float.
    ``best_init``: ``(best_init_index, n_iter)``. ``merge-list``: rows of
    ``(id_a, id_b, value, size)``. ``dbscan-labels``: ``(labels, roles)``.
    """
    try:
        tag = FACET_TAGS[facet]
    except KeyError:
        raise ValueError(f"unknown facet {facet!r}") from None
    head = bytes([tag])
    if facet == "centers":
        return head + _f8(value)
    if facet == "labels":
        return head + _i8(value)
    if facet == "inertia":
        return head + struct.pack(">d", float(value))
    if facet == "best_init":
        return head + _i8(list(value))
    if facet == "merge-list":
        out = [head]
        for a, b, v, size in value:
            out.append(struct.pack(">qqdq", int(a), int(b), float(v), int(size)))
        return b"".join(out)
    labels, roles = value
    return head + _i8(labels) + _i8(roles)


def fingerprint(facet: str, value: Any) -> str:
    return hashlib.sha256(canonical_bytes(facet, value)).hexdigest()


def float_to_hex(x: float) -> str:
    """16 lowercase hex digits of the binary64 bit pattern."""
    return struct.pack(">d", float(x)).hex()


def hex_to_float(text: str) -> float:
    return struct.unpack(">d", bytes.fromhex(text))[0]
