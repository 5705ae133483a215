"""End-to-end experiment engine: functional search plus system timing.

An experiment runs the real index on synthetic data (so recall and trace
statistics are measured, not assumed), then prices each batch with the
calibrated stage models:

* coarse probe — a batch GEMM against the centroid table on the host
  accelerator;
* ADC scan — table lookups over every code in the probed lists;
* rerank — full-precision candidate fetch, priced per backend
  (:mod:`flashann.backends`).

Reports are plain rows plus a metadata block carrying the spec, the package
version and the sha256 of every calibration file in effect, so a result can
be traced back to the exact model constants that produced it.  Output
contains nothing run-dependent: rerunning a spec byte-reproduces the files.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from . import __version__
from .backends import BACKEND_NAMES, make_backend, pipeline_cost
from .calibration import all_digests, load_calibration, _require
from .datasets import brute_force_knn, generate_synthetic, recall_at_k
from .errors import ModelConfigError
from .ivfpq import SearchParams, build_index, search_batch


@dataclass(frozen=True)
class GpuCalibration:
    effective_flops: float
    effective_lookup_rate: float

    def __post_init__(self):
        if self.effective_flops <= 0 or self.effective_lookup_rate <= 0:
            raise ValueError("compute rates must be positive")


def load_gpu_calibration() -> GpuCalibration:
    data = load_calibration("gpu.yaml")
    _require(data, {"effective_flops", "effective_lookup_rate"}, "gpu.yaml")
    return GpuCalibration(**data)


def estimate_gpu_stage_times(
    gpu: GpuCalibration, batch: int, nlist: int, dim: int, scanned_codes: int, m: int
) -> tuple[float, float]:
    """(probe_ms, scan_ms) for one batch.

    Probe is a (batch x dim) @ (dim x nlist) multiply-accumulate; scan is one
    table lookup per (code, subquantizer) over every scanned code.
    """
    probe_ms = batch * nlist * dim / gpu.effective_flops * 1e3
    scan_ms = scanned_codes * m / gpu.effective_lookup_rate * 1e3
    return probe_ms, scan_ms


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "experiment"
    n: int = 20000
    dim: int = 64
    nq: int = 256
    distribution: str = "gaussian-mixture"
    clusters: int = 64
    seed: int = 0
    k: int = 10
    nlist: int = 256
    m: int = 16
    residual: bool = True
    metric: str = "l2"
    train_iters: int = 25
    nprobes: tuple[int, ...] = (1, 4, 16, 64)
    nrerank: int = 500
    rerank: bool = True
    backends: tuple[str, ...] = ("dram", "ssd", "hbf")
    batches: tuple[int, ...] = (64,)

    def __post_init__(self):
        if min(self.n, self.dim, self.nq, self.k, self.nlist, self.m, self.nrerank) <= 0:
            raise ValueError("sizes must be positive")
        if not self.nprobes or any(p <= 0 for p in self.nprobes):
            raise ValueError("nprobes must be non-empty and positive")
        if not self.batches or any(b <= 0 for b in self.batches):
            raise ValueError("batches must be non-empty and positive")
        for b in self.backends:
            if b not in BACKEND_NAMES:
                raise ValueError(f"unknown backend {b!r}; expected one of {BACKEND_NAMES}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise ModelConfigError("experiment spec must be a mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ModelConfigError(f"experiment spec: unknown keys {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("nprobes", "batches", "backends"):
            if key in kwargs:
                value = kwargs[key]
                if not isinstance(value, (list, tuple)):
                    raise ModelConfigError(f"experiment spec: {key} must be a list")
                kwargs[key] = tuple(value)
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ModelConfigError(f"experiment spec: {exc}") from exc


REPORT_COLUMNS = (
    "nprobe",
    "backend",
    "batch",
    "recall_at_k",
    "mean_scanned_codes",
    "mean_candidates",
    "probe_ms",
    "scan_ms",
    "rerank_ms",
    "latency_ms",
    "qps",
    "qps_overlapped",
    "rerank_bytes",
    "rerank_energy_pj",
)


@dataclass
class SimReport:
    rows: list[dict]
    metadata: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in self.rows:
            out = []
            for col in REPORT_COLUMNS:
                v = row.get(col)
                if v is None:
                    out.append("")
                elif isinstance(v, float):
                    out.append(repr(v))
                else:
                    out.append(str(v))
            w.writerow(out)
        return buf.getvalue()

    def to_metadata_json(self) -> str:
        return json.dumps(self.metadata, sort_keys=True, indent=2) + "\n"


def _batch_slices(nq: int, batch: int):
    for start in range(0, nq, batch):
        yield start, min(start + batch, nq)


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> SimReport:
    """Run the functional search and price every (nprobe, backend, batch) cell."""
    ds = generate_synthetic(spec.n + spec.nq, spec.dim, seed=spec.seed,
                            distribution=spec.distribution, clusters=spec.clusters)
    base = ds.data[: spec.n]
    queries = ds.data[spec.n:]

    gt = brute_force_knn(base, queries, spec.k, metric=spec.metric, threads=threads)
    index = build_index(
        base,
        nlist=spec.nlist,
        m=spec.m,
        seed=spec.seed,
        residual=spec.residual,
        metric=spec.metric,
        train_iters=spec.train_iters,
    )

    gpu = load_gpu_calibration()
    backends = {name: make_backend(name) for name in spec.backends}

    rows: list[dict] = []
    for nprobe in spec.nprobes:
        params = SearchParams(
            k=spec.k,
            nprobe=min(nprobe, spec.nlist),
            nrerank=spec.nrerank,
            rerank=spec.rerank,
        )
        ids, _dists, trace = search_batch(index, queries, params,
                                          base=base if spec.rerank else None,
                                          threads=threads)
        recall = recall_at_k(ids, gt, spec.k)
        scanned = trace.scanned_counts()
        cands = trace.candidate_counts()
        for batch in spec.batches:
            cells = []
            for lo, hi in _batch_slices(spec.nq, batch):
                probe_ms, scan_ms = estimate_gpu_stage_times(
                    gpu, hi - lo, spec.nlist, spec.dim, int(scanned[lo:hi].sum()), spec.m
                )
                cells.append((lo, hi, probe_ms, scan_ms))
            for name in spec.backends:
                backend = backends[name]
                total_ms = 0.0
                probe_sum = scan_sum = rerank_sum = maxstage_sum = 0.0
                bytes_sum = 0
                energy_sum = 0.0
                has_energy = False
                for lo, hi, probe_ms, scan_ms in cells:
                    cost = backend.rerank_cost(cands[lo:hi], spec.dim)
                    cell = pipeline_cost(hi - lo, probe_ms, scan_ms, cost.time_us / 1000.0)
                    total_ms += cell.latency_ms
                    probe_sum += probe_ms
                    scan_sum += scan_ms
                    rerank_sum += cell.rerank_ms
                    maxstage_sum += max(probe_ms, scan_ms, cell.rerank_ms)
                    bytes_sum += cost.bytes_read
                    if cost.energy_pj is not None:
                        energy_sum += cost.energy_pj
                        has_energy = True
                ncells = len(cells)
                rows.append({
                    "nprobe": nprobe,
                    "backend": name,
                    "batch": batch,
                    "recall_at_k": recall,
                    "mean_scanned_codes": float(scanned.mean()) if scanned.size else 0.0,
                    "mean_candidates": float(cands.mean()) if cands.size else 0.0,
                    "probe_ms": probe_sum / ncells,
                    "scan_ms": scan_sum / ncells,
                    "rerank_ms": rerank_sum / ncells,
                    "latency_ms": total_ms / ncells,
                    "qps": spec.nq * 1000.0 / total_ms,
                    "qps_overlapped": spec.nq * 1000.0 / maxstage_sum,
                    "rerank_bytes": bytes_sum,
                    "rerank_energy_pj": energy_sum if has_energy else None,
                })

    metadata = {
        "version": __version__,
        "spec": dataclasses.asdict(spec),
        "seeds": {"data": spec.seed, "index": spec.seed},
        "calibration_sha256": all_digests(),
        "columns": list(REPORT_COLUMNS),
    }
    return SimReport(rows=rows, metadata=metadata)


def frontier(rows, x_key: str, y_key: str, minimize_x: bool = True, maximize_y: bool = True):
    """Pareto-optimal subset of rows under (x, y), input order preserved.

    A row is kept when no other row is at least as good on both axes and
    strictly better on one.
    """
    def better_eq(a, b, key, minimize):
        return a[key] <= b[key] if minimize else a[key] >= b[key]

    def better(a, b, key, minimize):
        return a[key] < b[key] if minimize else a[key] > b[key]

    kept = []
    for row in rows:
        dominated = False
        for other in rows:
            if other is row:
                continue
            if (
                better_eq(other, row, x_key, minimize_x)
                and better_eq(other, row, y_key, not maximize_y)
                and (better(other, row, x_key, minimize_x) or better(other, row, y_key, not maximize_y))
            ):
                dominated = True
                break
        if not dominated:
            kept.append(row)
    return kept


def select_operating_points(rows, min_recall: float, objective: str = "qps"):
    """Best row per backend meeting the recall floor, by descending objective.

    Ties break toward lower latency, then first occurrence.
    """
    best: dict[str, dict] = {}
    for row in rows:
        if row["recall_at_k"] < min_recall:
            continue
        name = row["backend"]
        cur = best.get(name)
        if cur is None or row[objective] > cur[objective] or (
            row[objective] == cur[objective] and row["latency_ms"] < cur["latency_ms"]
        ):
            best[name] = row
    return best
