"""Command-line front end.

Subcommands mirror the library workflow: ``gen`` makes synthetic vector
files, ``gt`` computes exact ground truth, ``build`` trains and writes an
index, ``search`` queries it, ``experiment`` runs a spec file through the
timing engine, ``sweep`` prices the device grid (and can select the
baseline), ``frontier`` filters a result CSV to its Pareto edge.

Exit codes: 0 success; 1 usage errors (bad flags or argument values);
2 unreadable or malformed data files; 3 invalid model/experiment
configuration.  All outputs are deterministic functions of the inputs —
reruns, and runs at different ``--threads``, produce byte-identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import FormatError, ModelConfigError
from . import datasets
from .datasets import (
    VectorDataset,
    brute_force_knn,
    generate_synthetic,
    load_ground_truth,
    load_vectors,
    recall_at_k,
    save_ground_truth,
    save_vectors,
)
from .ivfpq import SearchParams, build_index, load_index, save_index, search_batch


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the contract here is 1."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    p = _Parser(prog="flashann", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"flashann {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic vector file")
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--distribution", choices=("gaussian-mixture", "uniform"), default="gaussian-mixture")
    g.add_argument("--clusters", type=int, default=16)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--kind", choices=("float32", "uint8"), default="float32")
    g.set_defaults(func=_cmd_gen)

    t = sub.add_parser("gt", help="exact k-NN ground truth for a query file")
    t.add_argument("--base", required=True)
    t.add_argument("--queries", required=True)
    t.add_argument("--k", type=int, required=True)
    t.add_argument("--out-ids", required=True)
    t.add_argument("--out-dists", required=True)
    t.add_argument("--metric", choices=("l2", "ip"), default="l2")
    t.add_argument("--threads", type=int, default=1)
    t.set_defaults(func=_cmd_gt)

    b = sub.add_parser("build", help="train and write an index")
    b.add_argument("--base", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--nlist", type=int, required=True)
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--metric", choices=("l2", "ip"), default="l2")
    b.add_argument("--no-residual", action="store_true", help="encode raw vectors instead of residuals")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--train-iters", type=int, default=25)
    b.set_defaults(func=_cmd_build)

    s = sub.add_parser("search", help="query an index")
    s.add_argument("--index", required=True)
    s.add_argument("--queries", required=True)
    s.add_argument("--base", help="base vectors, required for exact rerank")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--nprobe", type=int, required=True)
    s.add_argument("--nrerank", type=int, default=0, help="candidates kept for rerank (default: 8*k)")
    s.add_argument("--no-rerank", action="store_true", help="rank by quantized distance only")
    s.add_argument("--out-ids", required=True)
    s.add_argument("--out-dists", required=True)
    s.add_argument("--gt-ids", help="optional ground-truth ids; prints recall@k")
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=_cmd_search)

    e = sub.add_parser("experiment", help="run an experiment spec through the timing engine")
    e.add_argument("--spec", required=True, help="YAML experiment spec")
    e.add_argument("--out-csv", required=True)
    e.add_argument("--out-meta", help="optional metadata JSON path")
    e.add_argument("--threads", type=int, default=1)
    e.set_defaults(func=_cmd_experiment)

    w = sub.add_parser("sweep", help="price the device design grid")
    w.add_argument("--out-csv", required=True)
    w.add_argument("--out-meta", help="optional metadata JSON path")
    w.add_argument("--select", action="store_true", help="print the selected baseline point")
    w.set_defaults(func=_cmd_sweep)

    f = sub.add_parser("frontier", help="keep the Pareto-optimal rows of a result CSV")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--x", required=True, help="x column name")
    f.add_argument("--y", required=True, help="y column name")
    f.add_argument("--maximize-x", action="store_true", help="prefer larger x (default: smaller)")
    f.add_argument("--minimize-y", action="store_true", help="prefer smaller y (default: larger)")
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_frontier)

    return p


def _cmd_gen(args) -> int:
    if args.count < 0 or args.dim <= 0:
        raise ValueError("count must be >= 0 and dim positive")
    ds = generate_synthetic(args.count, args.dim, seed=args.seed,
                            distribution=args.distribution, clusters=args.clusters,
                            element_kind=args.kind)
    save_vectors(ds, args.out)
    return 0


def _cmd_gt(args) -> int:
    base = load_vectors(args.base)
    queries = load_vectors(args.queries)
    gt = brute_force_knn(base, queries, args.k, metric=args.metric, threads=args.threads)
    save_ground_truth(gt, args.out_ids, args.out_dists)
    return 0


def _cmd_build(args) -> int:
    base = load_vectors(args.base)
    index = build_index(
        base,
        nlist=args.nlist,
        m=args.m,
        seed=args.seed,
        residual=not args.no_residual,
        metric=args.metric,
        train_iters=args.train_iters,
    )
    save_index(index, args.out)
    return 0


def _cmd_search(args) -> int:
    index = load_index(args.index)
    queries = load_vectors(args.queries)
    rerank = not args.no_rerank
    if rerank and not args.base:
        raise ValueError("--base is required unless --no-rerank is given")
    nrerank = args.nrerank if args.nrerank > 0 else 8 * args.k
    params = SearchParams(k=args.k, nprobe=args.nprobe, nrerank=nrerank, rerank=rerank)
    base = load_vectors(args.base) if args.base else None
    ids, dists, _trace = search_batch(index, queries, params, base=base, threads=args.threads)
    if ids.size and ids.max() >= 2**31:
        raise FormatError("vector ids do not fit the 32-bit id file format")
    save_vectors(VectorDataset(params.k, ids.shape[0], "int32", ids.astype(np.int32)), args.out_ids)
    save_vectors(VectorDataset(params.k, ids.shape[0], "float32", dists), args.out_dists)
    if args.gt_ids:
        truth_ids = load_vectors(args.gt_ids)
        truth = datasets.GroundTruth(truth_ids.dim, truth_ids.data.astype(np.int64),
                                     np.zeros(truth_ids.data.shape, np.float32))
        print(f"recall@{args.k} = {recall_at_k(ids, truth, args.k)!r}")
    return 0


def _load_spec_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError:
        raise
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise FormatError(f"{path}: not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise FormatError(f"{path}: experiment spec must be a mapping")
    return data


def _cmd_experiment(args) -> int:
    from .engine import ExperimentSpec, run_experiment

    spec = ExperimentSpec.from_dict(_load_spec_file(args.spec))
    report = run_experiment(spec, threads=args.threads)
    Path(args.out_csv).write_text(report.to_csv())
    if args.out_meta:
        Path(args.out_meta).write_text(report.to_metadata_json())
    return 0


def _cmd_sweep(args) -> int:
    from .sweep import select_baseline, sweep, sweep_metadata, sweep_to_csv

    rows = sweep()
    Path(args.out_csv).write_text(sweep_to_csv(rows))
    if args.out_meta:
        meta = sweep_metadata()
        Path(args.out_meta).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    if args.select:
        cfg, row = select_baseline(rows=rows)
        print(
            f"baseline wl_layers={cfg.wl_layers} page_bytes={cfg.page_bytes} "
            f"blocks_per_subarray={cfg.blocks_per_subarray} score={row['score']!r}"
        )
    return 0


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _cmd_frontier(args) -> int:
    import csv as _csv

    from .engine import frontier

    try:
        text = Path(args.input).read_text()
    except OSError:
        raise
    reader = _csv.reader(text.splitlines())
    table = list(reader)
    if not table:
        raise FormatError(f"{args.input}: empty CSV")
    header = table[0]
    for key in (args.x, args.y):
        if key not in header:
            raise ValueError(f"column {key!r} not in {args.input} header")
    rows = []
    for raw in table[1:]:
        if len(raw) != len(header):
            raise FormatError(f"{args.input}: ragged CSV row")
        rows.append({h: _parse_cell(v) for h, v in zip(header, raw)})
    for row in rows:
        for key in (args.x, args.y):
            if not isinstance(row[key], (int, float)):
                raise FormatError(f"{args.input}: non-numeric value in column {key!r}")
    kept = frontier(rows, args.x, args.y, minimize_x=not args.maximize_x,
                    maximize_y=not args.minimize_y)
    out_lines = [",".join(header)]
    keep_set = {id(r) for r in kept}
    for raw, row in zip(table[1:], rows):
        if id(row) in keep_set:
            out_lines.append(",".join(raw))
    Path(args.out).write_text("\n".join(out_lines) + "\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ModelConfigError as exc:
        print(f"flashann: model config error: {exc}", file=sys.stderr)
        return 3
    except FormatError as exc:
        print(f"flashann: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"flashann: file error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"flashann: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
