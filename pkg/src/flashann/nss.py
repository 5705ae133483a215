"""Functional and cycle model of the in-stack search unit.

The unit sits on the logic die under the flash stack and owns the rerank
stage: the host streams candidate ids per query, the unit generates page
addresses, reads the vectors, computes exact distances on a MAC array and
keeps the best candidates in a fixed-width bitonic sorter.

Functional side: :func:`bitonic_topk` reproduces the sorter network
comparator-for-comparator (width-256 bitonic sort, then a merge tournament
that keeps 256 survivors per pass), so selection behaviour — including the
(distance, id) tie order — matches what the hardware would produce.

Cycle side: :func:`rerank_timing` charges ingest/address cycles at one id
per queue per cycle, overlaps the flash reads with MAC+sort (the slower one
bounds the steady state), and adds a pipeline fill tail.  Energy is array
read energy per bit plus the unit's power draw over the busy time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import AddressError
from .nand import HbfStackModel

#: id used for sorter padding; sorts after any real vector id.
PAD_ID = np.int64(1) << 62

SORTER_STAGES_256 = 36  # sum over sub-networks of log2(size), sizes 2..256


@dataclass(frozen=True)
class NssConfig:
    queues: int = 32
    queue_bytes: int = 8192
    queue_entries: int = 1024
    mac_units: int = 32
    sorter_width: int = 256
    clock_ghz: float = 1.0
    area_mm2: float = 4.11
    power_mw: float = 620.3

    def __post_init__(self):
        if min(self.queues, self.queue_bytes, self.queue_entries, self.mac_units, self.sorter_width) <= 0:
            raise ValueError("search unit dimensions must be positive")
        if self.queue_bytes != 8 * self.queue_entries:
            # one entry is an (id, distance) pair: int32 + float32
            raise ValueError(
                f"queue_bytes={self.queue_bytes} does not hold queue_entries={self.queue_entries} 8-byte entries"
            )
        if self.sorter_width & (self.sorter_width - 1):
            raise ValueError("sorter width must be a power of two")
        if self.clock_ghz <= 0:
            raise ValueError("clock must be positive")


@dataclass(frozen=True)
class PageAddress:
    die: int
    subarray: int
    block: int
    page: int
    slot: int


@dataclass(frozen=True)
class VectorLayout:
    """Dense packing of fixed-size vectors into pages, pages into blocks,
    blocks into subarrays, subarrays into dies."""

    vector_bytes: int
    page_bytes: int
    pages_per_block: int
    blocks_per_subarray: int
    subarrays_per_die: int
    dies: int

    def __post_init__(self):
        if self.vector_bytes <= 0 or self.page_bytes <= 0:
            raise ValueError("vector and page sizes must be positive")
        if self.vector_bytes > self.page_bytes:
            raise ValueError(
                f"vector_bytes={self.vector_bytes} exceeds page_bytes={self.page_bytes}; vectors must not span pages"
            )

    @classmethod
    def from_stack(cls, stack: HbfStackModel, dim: int, dtype_bytes: int = 4) -> "VectorLayout":
        return cls(
            vector_bytes=dim * dtype_bytes,
            page_bytes=stack.page_bytes,
            pages_per_block=stack.pages_per_block,
            blocks_per_subarray=stack.blocks_per_subarray,
            subarrays_per_die=stack.subarrays_per_die,
            dies=stack.dies,
        )

    @property
    def vectors_per_page(self) -> int:
        return self.page_bytes // self.vector_bytes

    @property
    def pages_total(self) -> int:
        return self.dies * self.subarrays_per_die * self.blocks_per_subarray * self.pages_per_block

    @property
    def capacity_vectors(self) -> int:
        return self.pages_total * self.vectors_per_page

    def address_of(self, vector_id: int) -> PageAddress:
        if vector_id < 0 or vector_id >= self.capacity_vectors:
            raise AddressError(f"vector id {vector_id} outside layout capacity {self.capacity_vectors}")
        page_index, slot = divmod(int(vector_id), self.vectors_per_page)
        page_index, page = divmod(page_index, self.pages_per_block)
        page_index, block = divmod(page_index, self.blocks_per_subarray)
        die, subarray = divmod(page_index, self.subarrays_per_die)
        return PageAddress(die=die, subarray=subarray, block=block, page=page, slot=slot)

    def page_indices(self, vector_ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(vector_ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.capacity_vectors):
            raise AddressError("vector id outside layout capacity")
        return np.unique(ids // self.vectors_per_page)

    def pages_touched(self, vector_ids: np.ndarray) -> int:
        return int(self.page_indices(vector_ids).size)


# ---------------------------------------------------------------------------
# sorter network
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _sort_network(width: int):
    """Comparator stages of a full bitonic sort, ascending output.

    Each stage is (left indices, right indices, ascending mask); a
    comparator orders its pair according to its direction flag.
    """
    idx = np.arange(width)
    stages = []
    size = 2
    while size <= width:
        stride = size // 2
        while stride >= 1:
            partner = idx ^ stride
            keep = partner > idx
            ii = idx[keep]
            jj = partner[keep]
            up = (ii & size) == 0
            stages.append((ii, jj, up))
            stride //= 2
        size *= 2
    return tuple(stages)


@lru_cache(maxsize=None)
def _merge_network(width: int):
    """Stages that sort a bitonic sequence ascending (the tail of the full net)."""
    idx = np.arange(width)
    stages = []
    stride = width // 2
    while stride >= 1:
        partner = idx ^ stride
        keep = partner > idx
        ii = idx[keep]
        jj = partner[keep]
        stages.append((ii, jj, np.ones(ii.size, dtype=bool)))
        stride //= 2
    return tuple(stages)


def network_stage_count(width: int) -> int:
    return len(_sort_network(width))


def _apply_stages(d: np.ndarray, ids: np.ndarray, stages) -> None:
    """Run comparator stages in place over the last axis.

    Accepts (width,) or (rows, width) arrays; rows share the network, so a
    whole batch of chunks sorts in one pass over the stages.
    """
    for ii, jj, up in stages:
        di, dj = d[..., ii], d[..., jj]
        xi, xj = ids[..., ii], ids[..., jj]
        gt = (di > dj) | ((di == dj) & (xi > xj))
        lt = (di < dj) | ((di == dj) & (xi < xj))
        swap = np.where(up, gt, lt)
        d[..., ii] = np.where(swap, dj, di)
        d[..., jj] = np.where(swap, di, dj)
        ids[..., ii] = np.where(swap, xj, xi)
        ids[..., jj] = np.where(swap, xi, xj)


def _combine_sorted(d_a, id_a, d_b, id_b, width: int):
    """Merge ascending width-sized runs pairwise, keep the best of each pair.

    Works on (width,) or (pairs, width) arrays.  The survivor of comparing
    A[i] against B[width-1-i] is the best `width` of the union and forms a
    bitonic sequence, which the merge stages then sort.
    """
    rd = d_b[..., ::-1]
    ri = id_b[..., ::-1]
    take_b = (rd < d_a) | ((rd == d_a) & (ri < id_a))
    d = np.where(take_b, rd, d_a)
    ids = np.where(take_b, ri, id_a)
    _apply_stages(d, ids, _merge_network(width))
    return d, ids


def sorter_pass_count(n: int, width: int = 256) -> int:
    """Passes through the sorter network for n candidates: one full sort per
    width-sized chunk plus one combine per surviving pair."""
    if n <= 0:
        return 0
    chunks = math.ceil(n / width)
    return 2 * chunks - 1


def bitonic_topk(dists: np.ndarray, ids: np.ndarray, k: int, width: int = 256):
    """Exact top-k selection the way the hardware sorter does it.

    Candidates are processed in width-sized chunks: each chunk is bitonic
    sorted, then folded into the current best run via a single merge pass
    that always keeps `width` survivors.  Returns the first min(k, n)
    entries in ascending (distance, id) order.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if k > width:
        raise ValueError(f"k={k} exceeds sorter width {width}")
    d = np.ascontiguousarray(dists, dtype=np.float32).ravel()
    x = np.ascontiguousarray(ids, dtype=np.int64).ravel()
    if d.size != x.size:
        raise ValueError("distance and id arrays differ in length")
    n = d.size
    if n == 0:
        return d[:0], x[:0]
    chunks = math.ceil(n / width)
    pad = chunks * width - n
    if pad:
        d = np.concatenate([d, np.full(pad, np.inf, dtype=np.float32)])
        x = np.concatenate([x, np.full(pad, PAD_ID, dtype=np.int64)])
    dm = d.reshape(chunks, width).copy()
    im = x.reshape(chunks, width).copy()
    _apply_stages(dm, im, _sort_network(width))
    # Exact top-k is merge-order independent, so reduce as a tree and run
    # every pair of runs through the merge network at once.
    while dm.shape[0] > 1:
        half = dm.shape[0] // 2
        md, mi = _combine_sorted(dm[:half], im[:half], dm[half:2 * half], im[half:2 * half], width)
        if dm.shape[0] % 2:
            md = np.concatenate([md, dm[2 * half:]])
            mi = np.concatenate([mi, im[2 * half:]])
        dm, im = md, mi
    kk = min(k, n)
    return dm[0, :kk].copy(), im[0, :kk].copy()


# ---------------------------------------------------------------------------
# cycle model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NssTiming:
    queries: int
    candidates: int
    bytes_read: int
    waves: int
    ingest_cycles: int
    address_cycles: int
    read_cycles: int
    mac_cycles: int
    sort_cycles: int
    fill_cycles: int
    total_cycles: int
    time_us: float
    energy_pj: float


def rerank_timing(
    cfg: NssConfig,
    stack: HbfStackModel,
    candidate_counts,
    dim: int,
    dtype_bytes: int = 4,
) -> NssTiming:
    """Cycle and energy cost of reranking one batch.

    ``candidate_counts`` holds the per-query candidate count.  Queries map
    onto queues; a batch larger than the queue count runs in waves, each
    paying the array access latency once.  Flash reads overlap with
    MAC+sort, so the slower of the two bounds the middle of the pipeline.
    """
    counts = [int(c) for c in candidate_counts]
    if any(c < 0 for c in counts):
        raise ValueError("candidate counts must be non-negative")
    over = [c for c in counts if c > cfg.queue_entries]
    if over:
        raise ValueError(
            f"candidate count {max(over)} exceeds queue capacity {cfg.queue_entries}"
        )
    nq = len(counts)
    total = sum(counts)
    if nq == 0:
        return NssTiming(0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0.0, 0.0)

    pages_per_read = math.ceil(dim * dtype_bytes / stack.page_bytes)
    bytes_read = total * pages_per_read * stack.page_bytes
    waves = math.ceil(nq / cfg.queues)

    ingest = math.ceil(total / cfg.queues)
    address = math.ceil(total / cfg.queues)

    read_time_us = bytes_read / (stack.sustained_read_bw_gb_s * 1000.0) + waves * stack.access_latency_us
    read_cycles = math.ceil(read_time_us * cfg.clock_ghz * 1000.0)

    mac_cycles = total * math.ceil(dim / cfg.mac_units)
    sort_cycles = sum(
        sorter_pass_count(c, cfg.sorter_width) * network_stage_count(cfg.sorter_width)
        for c in counts
    )
    fill = math.ceil(dim / cfg.mac_units) + network_stage_count(cfg.sorter_width)

    total_cycles = ingest + address + max(read_cycles, mac_cycles + sort_cycles) + fill
    time_us = total_cycles / (cfg.clock_ghz * 1000.0)
    energy_pj = bytes_read * 8 * stack.read_energy_pj_per_bit + cfg.power_mw * time_us * 1000.0
    return NssTiming(
        queries=nq,
        candidates=total,
        bytes_read=bytes_read,
        waves=waves,
        ingest_cycles=ingest,
        address_cycles=address,
        read_cycles=read_cycles,
        mac_cycles=mac_cycles,
        sort_cycles=sort_cycles,
        fill_cycles=fill,
        total_cycles=total_cycles,
        time_us=time_us,
        energy_pj=energy_pj,
    )


def simulate_rerank(
    cfg: NssConfig,
    layout: VectorLayout,
    base: np.ndarray,
    queries: np.ndarray,
    candidate_ids,
    k: int,
    metric: str = "l2",
):
    """Functional rerank: exact distances plus the hardware top-k selection.

    Returns (distances, ids) shaped (nq, k), padded with inf / -1 when a
    query has fewer than k candidates.  Candidate lists must fit the
    per-query queue and address within the layout.
    """
    if k > cfg.sorter_width:
        raise ValueError(f"k={k} exceeds sorter width {cfg.sorter_width}")
    base = np.ascontiguousarray(base, dtype=np.float32)
    queries = np.ascontiguousarray(queries, dtype=np.float32)
    if queries.ndim == 1:
        queries = queries[None, :]
    nq = queries.shape[0]
    if len(candidate_ids) != nq:
        raise ValueError("one candidate list per query required")
    out_d = np.full((nq, k), np.inf, dtype=np.float32)
    out_i = np.full((nq, k), -1, dtype=np.int64)
    for qi in range(nq):
        ids = np.asarray(candidate_ids[qi], dtype=np.int64).ravel()
        if ids.size > cfg.queue_entries:
            raise ValueError(
                f"query {qi}: {ids.size} candidates exceed queue capacity {cfg.queue_entries}"
            )
        if ids.size == 0:
            continue
        if ids.min() < 0 or ids.max() >= layout.capacity_vectors:
            raise AddressError(f"query {qi}: candidate id outside layout capacity")
        if ids.max() >= base.shape[0]:
            raise AddressError(f"query {qi}: candidate id outside the stored dataset")
        exact = kernels.row_distances(queries[qi], base[ids], metric=metric)
        d, sel = bitonic_topk(exact, ids, k, width=cfg.sorter_width)
        take = min(k, d.size)
        out_d[qi, :take] = d[:take]
        out_i[qi, :take] = sel[:take]
    return out_d, out_i
