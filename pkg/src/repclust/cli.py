"""Command line entry point: ``repclust {run,report,gen,check,replay,fit}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import data, harness, report
from .energy import default_backend
from .fingerprint import float_to_hex
from .rng import as_state


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("thread counts must be positive")
    return values


def _seed_or_state(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def cmd_run(args: argparse.Namespace) -> int:
    with open(args.config, encoding="utf-8") as fh:
        raw = json.load(fh)
    if args.threads_list:
        raw["thread_counts"] = args.threads_list
    if args.reps is not None:
        raw["replications"] = args.reps
    if args.energy:
        raw["energy"] = True
    config = harness.RunConfig.from_dict(raw)
    backend = default_backend() if config.energy else None
    if config.energy and backend is None:
        logging.warning("no RAPL counters found; energy will be recorded as unavailable")
    records = harness.run_matrix(config, args.out, backend)
    runs = sum(1 for r in records if r["kind"] == "run")
    print(f"wrote {runs} run records ({len(records) - runs} errors) to {args.out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    rep = report.build_report(harness.read_records(args.records))
    md = report.render_markdown(rep)
    if args.md:
        with open(args.md, "w", encoding="utf-8") as fh:
            fh.write(md)
    else:
        sys.stdout.write(md)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.render_csv(rep))
    return 1 if args.strict and rep.crosses() else 0


def cmd_gen(args: argparse.Namespace) -> int:
    ds = data.make_blobs(args.n_samples, args.n_features, args.centers, args.cluster_std,
                         as_state(args.seed))
    if args.scale:
        ds = data.minmax_scale(ds)
    data.save_csv(ds, args.out)
    print(f"wrote {ds.n} x {ds.d} blobs to {args.out} (state {ds.meta['state']})")
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    diffs = harness.check_records(harness.read_records(args.a), harness.read_records(args.b))
    for line in diffs:
        print(line)
    if not diffs:
        print("fingerprints identical")
    return 1 if diffs else 0


def cmd_replay(args: argparse.Namespace) -> int:
    runs = list(harness.iter_runs(harness.read_records(args.records)))
    if args.limit:
        runs = runs[: args.limit]
    failed = 0
    for r in runs:
        got = harness.replay_record(r)
        ok = got == r["facets"]
        failed += not ok
        print(f"{'ok  ' if ok else 'FAIL'} {r['dataset']['name']}/{r['algorithm']} "
              f"threads={r['threads']} rep={r['replication']}")
    return 1 if failed else 0


def cmd_fit(args: argparse.Namespace) -> int:
    ds = data.load_csv(args.csv, args.label_column)
    if args.scale:
        ds = data.minmax_scale(ds)
    spec = harness.DatasetSpec(name=ds.name, kind="csv", path=args.csv,
                               label_column=args.label_column, scale=args.scale)
    section = {"k": args.k, "n_init": args.n_init, "eps": args.eps, "min_pts": args.min_pts}
    section = {k: v for k, v in section.items() if v is not None}
    params = harness.resolve_params(args.algorithm, section, spec, ds, as_state(args.seed),
                                    args.chunk_size)
    out = harness.run_cell(args.algorithm, ds, params, args.threads)
    summary = {"algorithm": args.algorithm, "threads": args.threads, "params": params,
               "facets": out.facets, "values": out.values,
               "duration_s": float_to_hex(out.duration_s)}
    if ds.labels is not None:
        from .metrics import adjusted_rand_index
        summary["ari"] = adjusted_rand_index(ds.labels, out.labels)
    if args.labels_out:
        np.savetxt(args.labels_out, out.labels, fmt="%d")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="repclust", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a replication matrix from a JSON config")
    r.add_argument("config")
    r.add_argument("--threads-list", type=_int_list, help="e.g. 1,2,4,8,16")
    r.add_argument("--reps", type=int)
    r.add_argument("--out", default="records.ndjson")
    r.add_argument("--energy", action="store_true", help="sample RAPL counters")
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("report", help="records file -> markdown (+ CSV) repeatability report")
    rp.add_argument("records")
    rp.add_argument("--md")
    rp.add_argument("--csv")
    rp.add_argument("--strict", action="store_true", help="exit 1 if any facet is non-repeatable")
    rp.set_defaults(func=cmd_report)

    g = sub.add_parser("gen", help="write a synthetic blob dataset as CSV")
    g.add_argument("--n-samples", type=int, default=60000)
    g.add_argument("--n-features", type=int, default=2)
    g.add_argument("--centers", type=int, default=10)
    g.add_argument("--cluster-std", type=float, default=0.7)
    g.add_argument("--seed", type=_seed_or_state, default=42, help="integer seed or key:counter state")
    g.add_argument("--scale", action="store_true", help="min-max scale before writing")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("check", help="compare fingerprints of two records files")
    c.add_argument("a")
    c.add_argument("b")
    c.set_defaults(func=cmd_check)

    rr = sub.add_parser("replay", help="re-execute records and compare fingerprints")
    rr.add_argument("records")
    rr.add_argument("--limit", type=int)
    rr.set_defaults(func=cmd_replay)

    f = sub.add_parser("fit", help="fit one algorithm on a CSV file")
    f.add_argument("algorithm", choices=harness.ALGORITHMS)
    f.add_argument("csv")
    f.add_argument("--label-column", type=lambda s: int(s) if s.lstrip("-").isdigit() else s)
    f.add_argument("--no-scale", dest="scale", action="store_false")
    f.add_argument("--k", type=int)
    f.add_argument("--n-init", type=int)
    f.add_argument("--eps", type=float)
    f.add_argument("--min-pts", type=int)
    f.add_argument("--seed", type=_seed_or_state, default=42)
    f.add_argument("--chunk-size", type=int, default=4096)
    f.add_argument("--threads", type=int, default=None,
                   help=f"worker count (default: ${harness.THREADS_ENV} or 1)")
    f.add_argument("--labels-out")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", "unset") is None:
        args.threads = harness.default_threads()
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"repclust: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
