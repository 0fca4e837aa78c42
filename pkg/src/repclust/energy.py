"""RAPL energy sampling with single-wraparound correction.

Counters are read at the start and end of a workload. A negative difference
means the counter wrapped once, and the domain's maximum range is added back.
Two or more wraps within one measurement cannot be detected; keep measured
workloads shorter than the counter's wrap period.
"""

from __future__ import annotations

import glob
import os
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

POWERCAP_ROOT = "/sys/class/powercap"


class EnergyUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class CounterReading:
    domain: str
    socket: int
    value_uj: int
    max_range_uj: int


@dataclass(frozen=True)
class EnergySample:
    domain: str
    socket: int
    start_uj: int
    end_uj: int
    max_range_uj: int
    corrected_uj: int

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "socket": self.socket,
            "start_uj": self.start_uj,
            "end_uj": self.end_uj,
            "max_range_uj": self.max_range_uj,
            "corrected_uj": self.corrected_uj,
        }


def corrected_delta(start_uj: int, end_uj: int, max_range_uj: int) -> int:
    delta = end_uj - start_uj
    if delta < 0:
        delta += max_range_uj
    return delta


class Backend(Protocol):
    def read(self) -> list[CounterReading]: ...


def _read_int(path: str) -> int:
    with open(path, encoding="ascii") as fh:
        return int(fh.read().strip())


class PowercapBackend:
    """Linux powercap tree: ``intel-rapl:<socket>`` packages and their sub-zones."""

    def __init__(self, root: str = POWERCAP_ROOT):
        self.root = root
        self.zones = self._discover()
        if not self.zones:
            raise EnergyUnavailable(f"no readable RAPL zones under {root}")

    def _discover(self) -> list[tuple[str, int, str]]:
        zones = []
        for path in sorted(glob.glob(os.path.join(self.root, "intel-rapl:*"))):
            base = os.path.basename(path)
            parts = base.split(":")
            try:
                socket = int(parts[1])
                with open(os.path.join(path, "name"), encoding="ascii") as fh:
                    name = fh.read().strip()
                _read_int(os.path.join(path, "energy_uj"))
                _read_int(os.path.join(path, "max_energy_range_uj"))
            except (OSError, ValueError, IndexError):
                continue
            domain = "package" if name.startswith("package") else name
            zones.append((domain, socket, path))
        return zones

    def read(self) -> list[CounterReading]:
        out = []
        for domain, socket, path in self.zones:
            try:
                out.append(CounterReading(
                    domain, socket,
                    _read_int(os.path.join(path, "energy_uj")),
                    _read_int(os.path.join(path, "max_energy_range_uj")),
                ))
            except (OSError, ValueError) as exc:
                raise EnergyUnavailable(str(exc)) from exc
        return out


class MockBackend:
    """Replays injected counter values, one per :meth:`read` call and domain."""

    def __init__(self, sequences: dict[tuple[str, int], Sequence[int]], max_range_uj: int):
        self.sequences = {key: list(values) for key, values in sequences.items()}
        self.max_range_uj = max_range_uj
        self._pos = 0

    def read(self) -> list[CounterReading]:
        out = []
        for (domain, socket), values in self.sequences.items():
            if self._pos >= len(values):
                raise EnergyUnavailable(f"mock sequence for {domain}:{socket} exhausted")
            out.append(CounterReading(domain, socket, values[self._pos], self.max_range_uj))
        self._pos += 1
        return out


def read_counters(backend: Backend) -> list[CounterReading]:
    return backend.read()


def default_backend(root: str = POWERCAP_ROOT) -> Backend | None:
    try:
        return PowercapBackend(root)
    except EnergyUnavailable:
        return None


def pair_samples(start: Iterable[CounterReading], end: Iterable[CounterReading]) -> list[EnergySample]:
    end_by_key = {(r.domain, r.socket): r for r in end}
    samples = []
    for s in start:
        e = end_by_key.get((s.domain, s.socket))
        if e is None:
            continue
        samples.append(EnergySample(
            s.domain, s.socket, s.value_uj, e.value_uj, s.max_range_uj,
            corrected_delta(s.value_uj, e.value_uj, s.max_range_uj),
        ))
    return samples


class EnergyMeter:
    """Brackets a workload with two counter reads. Never raises; returns None when unavailable."""

    def __init__(self, backend: Backend | None):
        self.backend = backend
        self._start: list[CounterReading] | None = None

    def start(self) -> None:
        self._start = None
        if self.backend is None:
            return
        try:
            self._start = self.backend.read()
        except EnergyUnavailable:
            self._start = None

    def stop(self) -> list[EnergySample] | None:
        if self.backend is None or self._start is None:
            return None
        try:
            end = self.backend.read()
        except EnergyUnavailable:
            return None
        return pair_samples(self._start, end)
