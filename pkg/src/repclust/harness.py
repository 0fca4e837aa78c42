"""Replication-matrix runner.

Every (dataset, algorithm, thread count, replication) cell runs the algorithm
with the same generator state, fingerprints the C/L/I/M facets and appends
one self-describing JSON line to the records file. Floats in records are
16-hex-digit bit patterns (see :func:`repclust.fingerprint.float_to_hex`).

Facets per algorithm:

========  =================  ===============  ==================  ======================
          C                  L                I                   M
========  =================  ===============  ==================  ======================
kmeans    final centers      final labels     inertia             (best restart, n_iter)
dbscan    --                 labels + roles   --                  --
ward      flat-cut centers   flat-cut labels  flat-cut inertia    full merge list
========  =================  ===============  ==================  ======================
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

import numpy as np

from . import __version__, data as data_mod, rng
from .dbscan import DbscanParams, dbscan_fit
from .detnum import DEFAULT_CHUNK_SIZE, ReductionPlan, fixed_sum, inject_reduction_fault
from .energy import Backend, EnergyMeter
from .fingerprint import fingerprint, float_to_hex, hex_to_float
from .kmeans import KMeansParams, kmeans_fit
from .metrics import adjusted_rand_index, inertia
from .rng import GeneratorState
from .ward import ward_fit, ward_labels

log = logging.getLogger(__name__)

ALGORITHMS = ("kmeans", "dbscan", "ward")
FACETS = ("C", "L", "I", "M")
THREADS_ENV = "REPCLUST_THREADS"


class ConfigError(ValueError):
    pass


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


@dataclass(frozen=True)
class DatasetSpec:
    """Where a dataset comes from. ``overrides`` holds per-dataset hyperparameters."""

    name: str
    kind: str
    path: str | None = None
    label_column: int | str | None = None
    n_samples: int | None = None
    n_features: int | None = None
    centers: int | None = None
    cluster_std: float | None = None
    state: str | None = None
    scale: bool = True
    overrides: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DatasetSpec":
        d = dict(d)
        kind = d.pop("kind", "csv" if "path" in d else "blobs")
        if kind not in ("csv", "blobs"):
            raise ConfigError(f"dataset kind must be 'csv' or 'blobs', got {kind!r}")
        seed = d.pop("seed", None)
        if kind == "blobs":
            for key in ("n_samples", "n_features", "centers", "cluster_std"):
                if key not in d:
                    raise ConfigError(f"blob dataset needs {key!r}")
            if d.get("state") is None:
                d["state"] = rng.as_state(42 if seed is None else seed).to_hex()
        elif not d.get("path"):
            raise ConfigError("csv dataset needs 'path'")
        overrides = dict(d.pop("overrides", {}))
        overrides.update({k: d.pop(k) for k in ("kmeans", "dbscan", "ward") if k in d})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown dataset fields: {sorted(unknown)}")
        d.setdefault("name", os.path.splitext(os.path.basename(d.get("path") or "blobs"))[0])
        return cls(kind=kind, overrides=overrides, **d)

    def to_dict(self) -> dict[str, Any]:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        return {k: v for k, v in out.items() if v is not None and v != {}}


def load_dataset(spec: DatasetSpec) -> data_mod.Dataset:
    if spec.kind == "blobs":
        ds = data_mod.make_blobs(spec.n_samples, spec.n_features, spec.centers,
                                 spec.cluster_std, GeneratorState.from_hex(spec.state),
                                 name=spec.name)
    else:
        ds = data_mod.load_csv(spec.path, spec.label_column, name=spec.name)
    return data_mod.minmax_scale(ds) if spec.scale else ds


@dataclass(frozen=True)
class RunConfig:
    datasets: list[DatasetSpec]
    algorithms: list[str]
    thread_counts: list[int]
    replications: int = 30
    state: GeneratorState = field(default_factory=lambda: GeneratorState.from_seed(42))
    chunk_size: int = DEFAULT_CHUNK_SIZE
    kmeans: dict[str, Any] = field(default_factory=dict)
    dbscan: dict[str, Any] = field(default_factory=dict)
    ward: dict[str, Any] = field(default_factory=dict)
    energy: bool = False
    fault: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        if not self.datasets:
            raise ConfigError("config needs at least one dataset")
        if not self.algorithms:
            raise ConfigError("config needs at least one algorithm")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if not self.thread_counts or any(t < 1 for t in self.thread_counts):
            raise ConfigError("thread_counts must be a non-empty list of positive integers")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be >= 1")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        d = dict(d)
        if "seed" in d and "state" in d:
            raise ConfigError("give either 'seed' or 'state', not both")
        state = rng.as_state(d.pop("state", d.pop("seed", 42)))
        datasets = [DatasetSpec.from_dict(x) for x in d.pop("datasets", [])]
        thread_counts = d.pop("thread_counts", None) or [default_threads()]
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(datasets=datasets, thread_counts=list(thread_counts), state=state, **d)

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def resolve_params(algorithm: str, config_section: dict[str, Any], spec: DatasetSpec,
                   ds: data_mod.Dataset, state: GeneratorState, chunk_size: int) -> dict[str, Any]:
    """Hyperparameters of one cell as plain JSON-able values.

    ``k`` defaults to the number of ground-truth classes; DBSCAN's ``min_pts``
    defaults to ``2 * n_features``.
    """
    p = {**config_section, **spec.overrides.get(algorithm, {})}
    if algorithm in ("kmeans", "ward"):
        k = p.get("k")
        if k is None or k == "n_classes":
            if ds.n_classes is None:
                raise ConfigError(f"{spec.name}: no labels, so {algorithm} needs an explicit k")
            k = ds.n_classes
        p["k"] = int(k)
    if algorithm == "kmeans":
        return KMeansParams(
            k=p["k"], n_init=int(p.get("n_init", 5)), max_iter=int(p.get("max_iter", 300)),
            init_method=p.get("init_method", "random-points"),
            state=rng.as_state(p.get("state", state)), chunk_size=chunk_size,
        ).to_dict()
    if algorithm == "dbscan":
        if "eps" not in p:
            raise ConfigError(f"{spec.name}: dbscan needs eps")
        min_pts = p.get("min_pts")
        return DbscanParams(float(p["eps"]), int(min_pts) if min_pts else 2 * ds.d).to_dict()
    return {"k": p["k"], "chunk_size": chunk_size}


def _cluster_centers(points: np.ndarray, labels: np.ndarray, k: int, chunk_size: int) -> np.ndarray:
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    for c in range(k):
        members = np.flatnonzero(labels == c)
        plan = ReductionPlan(members.shape[0], chunk_size)
        for j in range(points.shape[1]):
            centers[c, j] = fixed_sum(points[members, j], plan) / members.shape[0]
    return centers


@dataclass
class CellOutcome:
    facets: dict[str, str | None]
    values: dict[str, Any]
    labels: np.ndarray
    duration_s: float
    energy: list | None


def run_cell(algorithm: str, ds: data_mod.Dataset, params: dict[str, Any], threads: int,
             meter: EnergyMeter | None = None, fault: bool = False) -> CellOutcome:
    """Fit once and fingerprint. Timing and energy bracket the fit call only."""
    hook = inject_reduction_fault() if fault else contextlib.nullcontext()
    if meter is not None:
        meter.start()
    t0 = time.perf_counter()
    with hook:
        if algorithm == "kmeans":
            result = kmeans_fit(ds, KMeansParams.from_dict(params), threads)
        elif algorithm == "dbscan":
            result = dbscan_fit(ds, DbscanParams(**params), threads)
        elif algorithm == "ward":
            result = ward_fit(ds)
        else:
            raise ConfigError(f"unknown algorithm {algorithm!r}")
    duration = time.perf_counter() - t0
    samples = meter.stop() if meter is not None else None
    energy = [s.to_dict() for s in samples] if samples is not None else None

    if algorithm == "kmeans":
        facets = {
            "C": fingerprint("centers", result.centers),
            "L": fingerprint("labels", result.labels),
            "I": fingerprint("inertia", result.inertia),
            "M": fingerprint("best_init", (result.best_init_index, result.n_iter)),
        }
        values = {"inertia": float_to_hex(result.inertia),
                  "best_init_index": result.best_init_index, "n_iter": result.n_iter}
        labels = result.labels
    elif algorithm == "dbscan":
        facets = {"C": None, "L": fingerprint("dbscan-labels", (result.labels, result.roles)),
                  "I": None, "M": None}
        values = {"n_clusters": result.n_clusters,
                  "n_noise": int(np.count_nonzero(result.labels == -1))}
        labels = result.labels
    else:
        k = params["k"]
        labels = ward_labels(result, k)
        with hook:
            centers = _cluster_centers(ds.points, labels, k, params["chunk_size"])
            flat_inertia = inertia(ds.points, centers, labels, params["chunk_size"])
        facets = {
            "C": fingerprint("centers", centers),
            "L": fingerprint("labels", labels),
            "I": fingerprint("inertia", flat_inertia),
            "M": fingerprint("merge-list", result.merges),
        }
        values = {"inertia": float_to_hex(flat_inertia)}
    return CellOutcome(facets, values, np.asarray(labels), duration, energy)


def _fault_applies(fault: dict[str, Any] | None, algorithm: str, threads: int, rep: int) -> bool:
    if not fault:
        return False
    if fault.get("algorithm", algorithm) != algorithm:
        return False
    if "threads" in fault and threads not in fault["threads"]:
        return False
    return rep in fault.get("replications", [fault.get("replication", 1)])


def dataset_record(spec: DatasetSpec, ds: data_mod.Dataset) -> dict[str, Any]:
    out = spec.to_dict()
    out.update({"n": ds.n, "d": ds.d, "digest": ds.digest()})
    if spec.kind == "csv":
        with open(spec.path, "rb") as fh:
            out["file_sha256"] = hashlib.sha256(fh.read()).hexdigest()
    return out


def run_matrix(config: RunConfig, out_path: str | None = None,
               energy_backend: Backend | None = None) -> list[dict[str, Any]]:
    """Run every cell sequentially; append each record to ``out_path`` as it completes."""
    records: list[dict[str, Any]] = []
    sink = open(out_path, "a", encoding="utf-8") if out_path else None
    meter = EnergyMeter(energy_backend) if config.energy else None

    def emit(rec: dict[str, Any]) -> None:
        records.append(rec)
        if sink is not None:
            sink.write(json.dumps(rec, sort_keys=True) + "\n")
            sink.flush()

    try:
        for spec in config.datasets:
            try:
                ds = load_dataset(spec)
            except (OSError, ValueError) as exc:
                log.warning("dataset %s failed to load: %s", spec.name, exc)
                emit({"kind": "error", "artifact_version": __version__, "dataset": spec.to_dict(),
                      "algorithm": None, "error": f"{type(exc).__name__}: {exc}"})
                continue
            ds_rec = dataset_record(spec, ds)
            for algorithm in config.algorithms:
                section = getattr(config, algorithm)
                try:
                    params = resolve_params(algorithm, section, spec, ds, config.state,
                                            config.chunk_size)
                except (ConfigError, ValueError) as exc:
                    emit({"kind": "error", "artifact_version": __version__, "dataset": ds_rec,
                          "algorithm": algorithm, "error": f"{type(exc).__name__}: {exc}"})
                    continue
                for threads in config.thread_counts:
                    for rep in range(config.replications):
                        emit(_run_one(algorithm, ds, ds_rec, params, threads, rep, config, meter))
    finally:
        if sink is not None:
            sink.close()
    return records


def _run_one(algorithm, ds, ds_rec, params, threads, rep, config, meter) -> dict[str, Any]:
    fault = _fault_applies(config.fault, algorithm, threads, rep)
    base = {
        "kind": "run",
        "artifact_version": __version__,
        "dataset": ds_rec,
        "algorithm": algorithm,
        "threads": threads,
        "replication": rep,
        "params": params,
        "chunk_size": config.chunk_size,
        "fault_injected": fault,
    }
    try:
        out = run_cell(algorithm, ds, params, threads, meter, fault)
    except Exception as exc:  # recorded per cell, the matrix goes on
        log.warning("%s/%s threads=%d rep=%d failed: %s", ds.name, algorithm, threads, rep, exc)
        return {**base, "kind": "error", "error": f"{type(exc).__name__}: {exc}"}
    ari = adjusted_rand_index(ds.labels, out.labels) if ds.labels is not None else None
    return {
        **base,
        "facets": out.facets,
        "values": out.values,
        "ari": float_to_hex(ari) if ari is not None else None,
        "duration_s": float_to_hex(out.duration_s),
        "energy": out.energy if out.energy is not None else "unavailable",
    }


def read_records(path: str) -> list[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def iter_runs(records: Iterable[dict[str, Any]]) -> Iterator[dict[str, Any]]:
    return (r for r in records if r.get("kind") == "run")


def replay_record(record: dict[str, Any]) -> dict[str, str | None]:
    """Re-run one record from its embedded dataset spec, parameters and state."""
    spec_fields = {k: v for k, v in record["dataset"].items()
                   if k not in ("n", "d", "digest", "file_sha256")}
    spec = DatasetSpec(**spec_fields)
    ds = load_dataset(spec)
    if ds.digest() != record["dataset"]["digest"]:
        raise ValueError(f"dataset {spec.name} no longer matches the recorded digest")
    out = run_cell(record["algorithm"], ds, record["params"], record["threads"],
                   fault=record.get("fault_injected", False))
    return out.facets


def check_records(a: list[dict[str, Any]], b: list[dict[str, Any]]) -> list[str]:
    """Fingerprint differences between two records files, one line each."""

    def index(records):
        out = {}
        for r in iter_runs(records):
            key = (r["dataset"]["name"], r["algorithm"], r["threads"], r["replication"])
            out[key] = r["facets"]
        return out

    ia, ib = index(a), index(b)
    diffs = []
    for key in sorted(set(ia) | set(ib), key=lambda k: tuple(map(str, k))):
        label = "{}/{} threads={} rep={}".format(*key)
        if key not in ia:
            diffs.append(f"{label}: only in second file")
        elif key not in ib:
            diffs.append(f"{label}: only in first file")
        else:
            for facet in FACETS:
                if ia[key].get(facet) != ib[key].get(facet):
                    diffs.append(f"{label}: facet {facet} differs")
    return diffs


def record_float(record: dict[str, Any], *path: str) -> float | None:
    node: Any = record
    for key in path:
        if node is None:
            return None
        node = node.get(key)
    return hex_to_float(node) if node is not None else None
