"""Timing models for where the full-precision vectors live during rerank.

Three placements are modelled:

* ``dram`` — vectors in host memory, gathered over the memory system in
  cacheline-granular reads;
* ``ssd`` — vectors on a conventional NVMe device, every read rounded up to
  a 4 KB block;
* ``hbf`` — vectors in the high-bandwidth flash stack, reranked in place by
  the on-stack search unit (see :mod:`flashann.nss`).

For the link-attached placements a batch of ``c`` candidate fetches costs

    2 * link_latency + c * per_request_overhead
      + max(bytes/link_bw, bytes/device_bw, c * device_latency / queue_depth)

i.e. request issue is serialized per candidate, the payload is bounded by the
slower of link and device bandwidth, and device latency is overlapped queue
depth deep.  Bytes round each vector up to the access granularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .calibration import load_calibration, load_nand_calibration
from .errors import ModelConfigError
from .nand import NandSubarrayConfig, HbfStackModel, stack_model
from .nss import NssConfig, rerank_timing

BACKEND_NAMES = ("dram", "ssd", "hbf")


@dataclass(frozen=True)
class LinkModel:
    link_bw_gb_s: float
    link_latency_us: float
    device_bw_gb_s: float
    device_latency_us: float
    access_granularity_bytes: int
    per_request_overhead_us: float
    queue_depth: int

    def __post_init__(self):
        if min(self.link_bw_gb_s, self.device_bw_gb_s) <= 0:
            raise ValueError("bandwidths must be positive")
        if self.access_granularity_bytes <= 0 or self.queue_depth <= 0:
            raise ValueError("granularity and queue depth must be positive")


@dataclass(frozen=True)
class RerankCost:
    backend: str
    queries: int
    candidates: int
    bytes_read: int
    time_us: float
    energy_pj: float | None = None


class LinkBackend:
    def __init__(self, name: str, model: LinkModel):
        self.name = name
        self.model = model

    def rerank_cost(self, candidate_counts, dim: int, dtype_bytes: int = 4) -> RerankCost:
        counts = [int(c) for c in candidate_counts]
        if any(c < 0 for c in counts):
            raise ValueError("candidate counts must be non-negative")
        total = sum(counts)
        m = self.model
        vector_bytes = dim * dtype_bytes
        per_read = math.ceil(vector_bytes / m.access_granularity_bytes) * m.access_granularity_bytes
        bytes_read = total * per_read
        if total == 0:
            return RerankCost(self.name, len(counts), 0, 0, 0.0)
        transfer = max(
            bytes_read / (m.link_bw_gb_s * 1000.0),
            bytes_read / (m.device_bw_gb_s * 1000.0),
            total * m.device_latency_us / m.queue_depth,
        )
        time_us = 2.0 * m.link_latency_us + total * m.per_request_overhead_us + transfer
        return RerankCost(self.name, len(counts), total, bytes_read, time_us)


class HbfBackend:
    def __init__(self, stack: HbfStackModel, unit: NssConfig):
        self.name = "hbf"
        self.stack = stack
        self.unit = unit

    def rerank_cost(self, candidate_counts, dim: int, dtype_bytes: int = 4) -> RerankCost:
        t = rerank_timing(self.unit, self.stack, candidate_counts, dim, dtype_bytes)
        return RerankCost(self.name, t.queries, t.candidates, t.bytes_read, t.time_us, t.energy_pj)


def make_backend(name: str):
    """Build a rerank backend from its calibration file."""
    if name == "dram" or name == "ssd":
        data = load_calibration(f"backend_{name}.yaml")
        try:
            return LinkBackend(name, LinkModel(**data))
        except (TypeError, ValueError) as exc:
            raise ModelConfigError(f"backend_{name}.yaml: {exc}") from exc
    if name == "hbf":
        data = load_calibration("backend_hbf.yaml")
        try:
            sub = NandSubarrayConfig(**data["subarray"])
            unit = NssConfig(**data["search_unit"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelConfigError(f"backend_hbf.yaml: {exc}") from exc
        stack = stack_model(load_nand_calibration(), sub)
        return HbfBackend(stack, unit)
    raise ModelConfigError(f"unknown backend {name!r}; expected one of {BACKEND_NAMES}")


@dataclass(frozen=True)
class PipelineCost:
    batch: int
    probe_ms: float
    scan_ms: float
    rerank_ms: float
    latency_ms: float
    qps: float
    qps_overlapped: float


def pipeline_cost(batch: int, probe_ms: float, scan_ms: float, rerank_ms: float) -> PipelineCost:
    """Combine per-batch stage times.

    ``qps`` treats the three stages as a serial pipeline per batch;
    ``qps_overlapped`` is the throughput ceiling when batches stream through
    and the slowest stage bounds the rate.
    """
    if batch <= 0:
        raise ValueError("batch must be positive")
    stages = (probe_ms, scan_ms, rerank_ms)
    if any(s < 0 for s in stages):
        raise ValueError("stage times must be non-negative")
    latency = probe_ms + scan_ms + rerank_ms
    if latency <= 0:
        raise ValueError("pipeline has zero latency")
    return PipelineCost(
        batch=batch,
        probe_ms=probe_ms,
        scan_ms=scan_ms,
        rerank_ms=rerank_ms,
        latency_ms=latency,
        qps=batch * 1000.0 / latency,
        qps_overlapped=batch * 1000.0 / max(stages),
    )
