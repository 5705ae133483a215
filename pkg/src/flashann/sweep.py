"""Device design-space sweep and baseline subarray selection.

Each grid point (wordline layers, page size, blocks per subarray) is priced
with the analytic device model, then coupled to a nominal search workload so
the sweep reports end-to-end queries/s next to the raw device numbers.

Selection is a constrained geometric score: points must clear a minimum
stack capacity and (optionally) a stack access latency ceiling — the latter
keeps the qps penalty of slow reads bounded — and the winner maximizes

    (capacity / max_capacity)^w_cap * (bandwidth / max_bandwidth)^w_bw

with both maxima taken over the feasible set, so weights trade off relative
shortfall rather than raw units.
"""

from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass

from .calibration import _require, load_calibration, load_nand_calibration
from .errors import ModelConfigError
from .nand import (
    NandCalibration,
    NandSubarrayConfig,
    design_grid,
    stack_model,
    subarray_metrics,
)
from .nss import NssConfig, rerank_timing
from .backends import pipeline_cost
from .engine import estimate_gpu_stage_times, load_gpu_calibration


@dataclass(frozen=True)
class DseConfig:
    weight_capacity: float = 1.0
    weight_bandwidth: float = 1.0
    min_stack_capacity_bytes: float = 5.12e11
    max_stack_latency_us: float | None = 4.25

    def __post_init__(self):
        if self.weight_capacity < 0 or self.weight_bandwidth < 0:
            raise ValueError("weights must be non-negative")
        if self.weight_capacity == 0 and self.weight_bandwidth == 0:
            raise ValueError("at least one weight must be positive")


def load_dse_config() -> DseConfig:
    data = load_calibration("dse.yaml")
    _require(
        data,
        {"weight_capacity", "weight_bandwidth", "min_stack_capacity_bytes", "max_stack_latency_us"},
        "dse.yaml",
    )
    try:
        return DseConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ModelConfigError(f"dse.yaml: {exc}") from exc


@dataclass(frozen=True)
class WorkloadSpec:
    """Nominal workload used to attach qps numbers to device grid points."""

    n: int = 20000
    dim: int = 64
    nlist: int = 256
    m: int = 16
    nprobe: int = 16
    nrerank: int = 500
    batch: int = 64


SWEEP_COLUMNS = (
    "wl_layers",
    "page_bytes",
    "blocks_per_subarray",
    "subarray_capacity_bits",
    "read_energy_pj_per_bit",
    "subarray_latency_us",
    "subarray_area_mm2",
    "subarrays_per_die",
    "die_capacity_bytes",
    "stack_capacity_bytes",
    "stack_bandwidth_gb_s",
    "stack_latency_us",
    "feasible",
    "score",
    "qps",
    "latency_ms",
)


def _workload_cost(stack, unit: NssConfig, gpu, wl: WorkloadSpec):
    counts = [wl.nrerank] * wl.batch
    timing = rerank_timing(unit, stack, counts, wl.dim)
    scanned = int(round(wl.n * wl.nprobe / wl.nlist)) * wl.batch
    probe_ms, scan_ms = estimate_gpu_stage_times(gpu, wl.batch, wl.nlist, wl.dim, scanned, wl.m)
    return pipeline_cost(wl.batch, probe_ms, scan_ms, timing.time_us / 1000.0)


def sweep(
    cal: NandCalibration | None = None,
    grid: list[NandSubarrayConfig] | None = None,
    dse: DseConfig | None = None,
    workload: WorkloadSpec | None = None,
    unit: NssConfig | None = None,
) -> list[dict]:
    """Price every grid point; feasible points carry a normalized score."""
    cal = cal or load_nand_calibration()
    grid = list(grid) if grid is not None else design_grid()
    dse = dse or load_dse_config()
    workload = workload or WorkloadSpec()
    unit = unit or NssConfig()
    gpu = load_gpu_calibration()

    rows = []
    for cfg in grid:
        m = subarray_metrics(cal, cfg)
        stack = stack_model(cal, cfg)
        cost = _workload_cost(stack, unit, gpu, workload)
        feasible = stack.capacity_bytes >= dse.min_stack_capacity_bytes and (
            dse.max_stack_latency_us is None or stack.access_latency_us <= dse.max_stack_latency_us
        )
        rows.append({
            "wl_layers": cfg.wl_layers,
            "page_bytes": cfg.page_bytes,
            "blocks_per_subarray": cfg.blocks_per_subarray,
            "subarray_capacity_bits": m.capacity_bits,
            "read_energy_pj_per_bit": m.read_energy_pj_per_bit,
            "subarray_latency_us": m.read_latency_us,
            "subarray_area_mm2": m.area_mm2,
            "subarrays_per_die": stack.subarrays_per_die,
            "die_capacity_bytes": stack.capacity_bytes // stack.dies,
            "stack_capacity_bytes": stack.capacity_bytes,
            "stack_bandwidth_gb_s": stack.sustained_read_bw_gb_s,
            "stack_latency_us": stack.access_latency_us,
            "feasible": feasible,
            "score": None,
            "qps": cost.qps,
            "latency_ms": cost.latency_ms,
        })

    feasible_rows = [r for r in rows if r["feasible"]]
    if feasible_rows:
        max_cap = max(r["stack_capacity_bytes"] for r in feasible_rows)
        max_bw = max(r["stack_bandwidth_gb_s"] for r in feasible_rows)
        for r in feasible_rows:
            r["score"] = (
                (r["stack_capacity_bytes"] / max_cap) ** dse.weight_capacity
                * (r["stack_bandwidth_gb_s"] / max_bw) ** dse.weight_bandwidth
            )
    return rows


def select_baseline(
    cal: NandCalibration | None = None,
    grid: list[NandSubarrayConfig] | None = None,
    dse: DseConfig | None = None,
    workload: WorkloadSpec | None = None,
    rows: list[dict] | None = None,
) -> tuple[NandSubarrayConfig, dict]:
    """Winning grid point under the constrained score; ties break toward the
    smaller geometry (layers, then page, then blocks)."""
    if rows is None:
        rows = sweep(cal=cal, grid=grid, dse=dse, workload=workload)
    scored = [r for r in rows if r["score"] is not None]
    if not scored:
        raise ModelConfigError("no feasible grid point under the selection constraints")
    best = max(
        scored,
        key=lambda r: (r["score"], -r["wl_layers"], -r["page_bytes"], -r["blocks_per_subarray"]),
    )
    cfg = NandSubarrayConfig(best["wl_layers"], best["page_bytes"], best["blocks_per_subarray"])
    return cfg, best


def sweep_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        out = []
        for col in SWEEP_COLUMNS:
            v = row.get(col)
            if v is None:
                out.append("")
            elif isinstance(v, bool):
                out.append(str(v))
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        w.writerow(out)
    return buf.getvalue()


def sweep_metadata(dse: DseConfig | None = None, workload: WorkloadSpec | None = None) -> dict:
    from . import __version__
    from .calibration import all_digests

    dse = dse or load_dse_config()
    workload = workload or WorkloadSpec()
    return {
        "version": __version__,
        "dse": dataclasses.asdict(dse),
        "workload": dataclasses.asdict(workload),
        "calibration_sha256": all_digests(),
        "columns": list(SWEEP_COLUMNS),
    }
