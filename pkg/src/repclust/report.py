"""Repeatability report: a pure function of the records.

For each (dataset, algorithm, threads) cell, a facet is repeatable when every
replication has the same fingerprint. The "all threads" verdict additionally
requires all thread counts of that (dataset, algorithm) to agree. The rendered
grid marks a non-repeatable facet with ``X`` and a facet that does not apply
to the algorithm with ``-``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Iterable

from .fingerprint import hex_to_float
from .harness import FACETS, iter_runs

NOISE_NOTE = "DBSCAN noise (-1) is scored as one extra cluster in ARI."


class InsufficientReplications(ValueError):
    pass


@dataclass(frozen=True)
class CellVerdict:
    replications: int
    facets: dict[str, bool | None]
    total_duration_s: float
    total_energy_uj: dict[str, int] | None


@dataclass(frozen=True)
class RepeatabilityReport:
    datasets: list[str]
    algorithms: list[str]
    thread_counts: list[int]
    cells: dict[tuple[str, str, int], CellVerdict]
    cross_thread: dict[tuple[str, str], dict[str, bool | None]]
    ari: dict[tuple[str, str], float | None]
    errors: list[str] = field(default_factory=list)

    def crosses(self) -> int:
        per_cell = sum(v is False for c in self.cells.values() for v in c.facets.values())
        cross = sum(v is False for c in self.cross_thread.values() for v in c.values())
        return per_cell + cross


def _ordered(values: Iterable) -> list:
    seen: dict = {}
    for v in values:
        seen.setdefault(v, None)
    return list(seen)


def _verdict(digests: list[str | None]) -> bool | None:
    if all(d is None for d in digests):
        return None
    return len(set(digests)) == 1


def build_report(records: list[dict[str, Any]], min_replications: int = 2) -> RepeatabilityReport:
    runs = list(iter_runs(records))
    groups: dict[tuple[str, str, int], list[dict]] = {}
    for r in runs:
        groups.setdefault((r["dataset"]["name"], r["algorithm"], r["threads"]), []).append(r)

    short = [k for k, v in groups.items() if len(v) < min_replications]
    if short:
        name = "{}/{} threads={}".format(*short[0])
        raise InsufficientReplications(
            f"{name} has {len(groups[short[0]])} replication(s); need >= {min_replications}"
        )

    cells = {}
    for key, recs in groups.items():
        recs = sorted(recs, key=lambda r: r["replication"])
        energy = _energy_total(recs)
        cells[key] = CellVerdict(
            replications=len(recs),
            facets={f: _verdict([r["facets"].get(f) for r in recs]) for f in FACETS},
            total_duration_s=sum(hex_to_float(r["duration_s"]) for r in recs),
            total_energy_uj=energy,
        )

    datasets = _ordered(k[0] for k in groups)
    algorithms = _ordered(k[1] for k in groups)
    thread_counts = sorted(_ordered(k[2] for k in groups))

    cross, ari = {}, {}
    for ds in datasets:
        for alg in algorithms:
            recs = [r for r in runs if r["dataset"]["name"] == ds and r["algorithm"] == alg]
            if not recs:
                continue
            cross[(ds, alg)] = {f: _verdict([r["facets"].get(f) for r in recs]) for f in FACETS}
            first = min(recs, key=lambda r: (r["threads"], r["replication"]))
            ari[(ds, alg)] = hex_to_float(first["ari"]) if first.get("ari") else None

    errors = []
    for r in records:
        if r.get("kind") == "error":
            where = r["dataset"].get("name", "?")
            if r.get("algorithm"):
                where += f"/{r['algorithm']}"
            if "threads" in r:
                where += f" threads={r['threads']} rep={r['replication']}"
            errors.append(f"{where}: {r['error']}")

    return RepeatabilityReport(datasets, algorithms, thread_counts, cells, cross, ari, errors)


def _energy_total(recs: list[dict]) -> dict[str, int] | None:
    totals: dict[str, int] = {}
    for r in recs:
        samples = r.get("energy")
        if not isinstance(samples, list):
            return None
        for s in samples:
            key = f"{s['domain']}:{s['socket']}"
            totals[key] = totals.get(key, 0) + int(s["corrected_uj"])
    return totals


def _mark(v: bool | None) -> str:
    if v is None:
        return "-"
    return "" if v else "X"


def render_markdown(report: RepeatabilityReport) -> str:
    lines = ["# Bitwise repeatability", ""]
    lines.append("C=final centers, L=final labels, I=inertia, M=best initialization "
                 "(merge list for ward). X = at least two replications differ; - = not applicable.")
    for alg in report.algorithms:
        lines += ["", f"## {alg}", ""]
        head = ["dataset"]
        for t in report.thread_counts:
            head += [f"{t}t {f}" for f in FACETS]
        head += [f"all {f}" for f in FACETS]
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "---|" * len(head))
        for ds in report.datasets:
            if (ds, alg) not in report.cross_thread:
                continue
            row = [ds]
            for t in report.thread_counts:
                cell = report.cells.get((ds, alg, t))
                row += [_mark(cell.facets[f]) if cell else "" for f in FACETS]
            row += [_mark(report.cross_thread[(ds, alg)][f]) for f in FACETS]
            lines.append("| " + " | ".join(row) + " |")

    lines += ["", "## ARI against ground truth (first replication)", ""]
    lines.append("| dataset | " + " | ".join(report.algorithms) + " |")
    lines.append("|" + "---|" * (len(report.algorithms) + 1))
    for ds in report.datasets:
        row = [ds]
        for alg in report.algorithms:
            v = report.ari.get((ds, alg))
            row.append("" if v is None else f"{v:.4f}")
        lines.append("| " + " | ".join(row) + " |")
    lines += ["", NOISE_NOTE]

    lines += ["", "## Total fit time over all replications (s)", ""]
    lines.append("| dataset | algorithm | " + " | ".join(f"{t}t" for t in report.thread_counts) + " |")
    lines.append("|" + "---|" * (len(report.thread_counts) + 2))
    for ds in report.datasets:
        for alg in report.algorithms:
            if (ds, alg) not in report.cross_thread:
                continue
            row = [ds, alg]
            for t in report.thread_counts:
                cell = report.cells.get((ds, alg, t))
                row.append("" if cell is None else f"{cell.total_duration_s:.3f}")
            lines.append("| " + " | ".join(row) + " |")

    if report.errors:
        lines += ["", "## Errors", ""]
        lines += [f"- {e}" for e in report.errors]
    return "\n".join(lines) + "\n"


def render_csv(report: RepeatabilityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "algorithm", "threads", "replications", *FACETS,
                "total_duration_s", "total_energy_uj", "ari"])
    for (ds, alg, t), cell in report.cells.items():
        energy = ("" if cell.total_energy_uj is None
                  else ";".join(f"{k}={v}" for k, v in sorted(cell.total_energy_uj.items())))
        ari = report.ari.get((ds, alg))
        w.writerow([ds, alg, t, cell.replications, *(_mark(cell.facets[f]) for f in FACETS),
                    repr(cell.total_duration_s), energy, "" if ari is None else repr(ari)])
    for (ds, alg), facets in report.cross_thread.items():
        w.writerow([ds, alg, "all", "", *(_mark(facets[f]) for f in FACETS), "", "", ""])
    return buf.getvalue()
