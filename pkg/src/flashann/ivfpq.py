"""IVF-PQ index: coarse k-means quantizer, product-quantized inverted lists,
ADC lookup-table scan, and exact-distance reranking.

Query flow (one query):
  1. scan all coarse centroids exactly, probe the `nprobe` nearest lists;
  2. ADC-scan the probed lists and keep the best `nrerank` candidates by
     (approximate distance, id);
  3. fetch those candidates' full vectors and rerank by exact distance.

Inner product is negated up front so every step minimizes.  All exact
distances go through the canonical kernels, so a search with nprobe == nlist
and full rerank reproduces the brute-force oracle bit for bit.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .datasets import VectorDataset, _as_matrix
from .errors import FormatError

KSUB = 256  # codewords per subquantizer; one byte per subspace

_MAGIC = b"FXIV"
_VERSION = 1
_METRICS = ("l2", "ip")


@dataclass
class CoarseQuantizer:
    centroids: np.ndarray  # (nlist, dim) float32

    @property
    def nlist(self) -> int:
        return self.centroids.shape[0]


@dataclass
class PqCodebook:
    tables: np.ndarray  # (m, KSUB, sub_dim) float32

    @property
    def m(self) -> int:
        return self.tables.shape[0]

    @property
    def sub_dim(self) -> int:
        return self.tables.shape[2]

    @property
    def code_bytes(self) -> int:
        return self.m


@dataclass
class InvertedList:
    list_id: int
    ids: np.ndarray  # (n,) int64, ascending
    codes: np.ndarray  # (n, m) uint8


@dataclass
class IvfPqIndex:
    dim: int
    metric: str
    residual: bool
    coarse: CoarseQuantizer
    codebook: PqCodebook
    lists: list[InvertedList]

    @property
    def nlist(self) -> int:
        return self.coarse.nlist

    @property
    def count(self) -> int:
        return sum(len(l.ids) for l in self.lists)


@dataclass
class SearchParams:
    nprobe: int
    nrerank: int
    k: int
    rerank: bool = True

    def __post_init__(self):
        if self.nprobe < 1 or self.k < 1 or self.nrerank < 1:
            raise ValueError("nprobe, nrerank, k must be positive")
        if self.rerank and self.k > self.nrerank:
            raise ValueError("k must not exceed nrerank when reranking")


@dataclass
class QueryTrace:
    """What one query touched: (list_id, codes scanned) plus the candidate ids."""

    lists: list[tuple[int, int]]
    candidate_ids: np.ndarray  # (<=nrerank,) int64

    @property
    def scanned(self) -> int:
        return sum(c for _, c in self.lists)


@dataclass
class CandidateTrace:
    queries: list[QueryTrace] = field(default_factory=list)

    def candidate_counts(self) -> np.ndarray:
        return np.array([len(q.candidate_ids) for q in self.queries], dtype=np.int64)

    def scanned_counts(self) -> np.ndarray:
        return np.array([q.scanned for q in self.queries], dtype=np.int64)


# ---------------------------------------------------------------------------
# k-means (training only; user-visible distances never come from here)

def _assign_blas(x64: np.ndarray, c64: np.ndarray, chunk: int = 8192):
    """Nearest-centroid labels via the float64 expansion trick; ties -> lower id."""
    n = x64.shape[0]
    c_sq = np.einsum("ij,ij->i", c64, c64)
    labels = np.empty(n, dtype=np.int64)
    mind2 = np.empty(n, dtype=np.float64)
    for s in range(0, n, chunk):
        xs = x64[s : s + chunk]
        d2 = xs @ c64.T
        d2 *= -2.0
        d2 += np.einsum("ij,ij->i", xs, xs)[:, None]
        d2 += c_sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        labels[s : s + chunk] = np.argmin(d2, axis=1)
        mind2[s : s + chunk] = d2[np.arange(d2.shape[0]), labels[s : s + chunk]]
    return labels, mind2


def _kmeanspp_init(x64: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x64.shape[0]
    centroids = np.empty((k, x64.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = x64[first]
    diff = x64 - centroids[0]
    d2 = np.einsum("ij,ij->i", diff, diff)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[i] = x64[idx]
        diff = x64 - centroids[i]
        np.minimum(d2, np.einsum("ij,ij->i", diff, diff), out=d2)
    return centroids


def train_kmeans(data, k: int, iters: int = 25, seed: int = 0, return_history: bool = False):
    """Lloyd's with k-means++ seeding, a fixed iteration cap, and empty-cluster
    repair by stealing the globally farthest point.  Deterministic for a fixed
    seed; the per-iteration inertia sequence never increases (training stops
    if a float-precision uptick appears at a plateau)."""
    x = _as_matrix(data)
    n = x.shape[0]
    if not 0 < k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    x64 = x.astype(np.float64)
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(x64, k, rng)
    history: list[float] = []
    labels = None
    for _ in range(iters):
        new_labels, mind2 = _assign_blas(x64, centroids)
        inertia = float(mind2.sum())
        if history and inertia > history[-1]:
            break
        history.append(inertia)
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        for j in range(x64.shape[1]):
            sums[:, j] = np.bincount(labels, weights=x64[:, j], minlength=k)
        empties = np.flatnonzero(counts == 0)
        for e in empties:
            far = int(np.argmax(mind2))
            centroids[e] = x64[far]
            mind2[far] = -1.0
        nonzero = counts > 0
        centroids[nonzero] = sums[nonzero] / counts[nonzero, None]
    result = centroids.astype(np.float32)
    return (result, history) if return_history else result


# ---------------------------------------------------------------------------
# PQ encode/decode and ADC tables

def encode_pq(codebook: PqCodebook, vecs, chunk: int = 16384) -> np.ndarray:
    """Per-subspace nearest codeword (canonical kernel; ties -> lower index)."""
    x = _as_matrix(vecs)
    m, sub = codebook.m, codebook.sub_dim
    if x.shape[1] != m * sub:
        raise ValueError("vector width does not match codebook")
    codes = np.empty((x.shape[0], m), dtype=np.uint8)
    for s in range(0, x.shape[0], chunk):
        xs = x[s : s + chunk]
        for j in range(m):
            d = kernels.pairwise_sqeuclidean(xs[:, j * sub : (j + 1) * sub], codebook.tables[j])
            codes[s : s + chunk, j] = np.argmin(d, axis=1).astype(np.uint8)
    return codes


def decode_pq(codebook: PqCodebook, codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.uint8)
    parts = [codebook.tables[j][codes[:, j]] for j in range(codebook.m)]
    return np.concatenate(parts, axis=1) if parts else np.empty((codes.shape[0], 0), np.float32)


def build_adc_table(codebook: PqCodebook, query, metric: str = "l2", list_centroid=None):
    """Distance lookup table for one query (and one list when residual).

    Returns (table, bias): scan distance for code c is
    ``bias + sum_j table[j, c[j]]`` accumulated in float32.
    """
    q = np.ascontiguousarray(query, dtype=np.float32).ravel()
    m, sub = codebook.m, codebook.sub_dim
    if q.size != m * sub:
        raise ValueError("query width does not match codebook")
    if metric == "l2":
        target = q if list_centroid is None else q - np.ascontiguousarray(list_centroid, dtype=np.float32)
        table = kernels.adc_table_sqeuclidean(target.reshape(m, sub), codebook.tables)
        bias = np.float32(0.0)
    elif metric == "ip":
        table = kernels.adc_table_neg_inner(q.reshape(m, sub), codebook.tables)
        if list_centroid is None:
            bias = np.float32(0.0)
        else:
            c = np.ascontiguousarray(list_centroid, dtype=np.float32)
            bias = kernels.pairwise_neg_inner(q.reshape(1, -1), c.reshape(1, -1))[0, 0]
    else:
        raise ValueError(f"unknown metric: {metric!r}")
    return table, bias


# ---------------------------------------------------------------------------
# Index construction

def _spawn_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def build_index(
    base,
    nlist: int,
    m: int,
    seed: int = 0,
    residual: bool = True,
    metric: str = "l2",
    train_iters: int = 25,
    train_cap: int = 65536,
) -> IvfPqIndex:
    """Train the coarse quantizer and PQ codebook, then encode every vector.

    Training runs on a capped subsample (deterministic for the seed); codes
    are KSUB=256 per subspace, i.e. exactly `m` bytes per vector.
    """
    x = _as_matrix(base)
    n, dim = x.shape
    if metric not in _METRICS:
        raise ValueError(f"unknown metric: {metric!r}")
    if dim == 0 or n == 0:
        raise ValueError("cannot index an empty dataset")
    if dim % m != 0:
        raise ValueError(f"m={m} does not divide dim={dim}")
    if not 0 < nlist <= n:
        raise ValueError(f"need 1 <= nlist <= n, got nlist={nlist}, n={n}")
    sample_seed, coarse_seed, pq_root = _spawn_seeds(seed, 3)
    if n > train_cap:
        pick = np.random.default_rng(sample_seed).choice(n, size=train_cap, replace=False)
        train = x[np.sort(pick)]
    else:
        train = x
    if len(train) < KSUB:
        raise ValueError(f"need at least {KSUB} training vectors, got {len(train)}")

    centroids = train_kmeans(train, nlist, iters=train_iters, seed=coarse_seed)
    c64 = centroids.astype(np.float64)

    train_labels, _ = _assign_blas(train.astype(np.float64), c64)
    pq_train = train - centroids[train_labels] if residual else train
    sub = dim // m
    pq_seeds = _spawn_seeds(pq_root, m)
    tables = np.empty((m, KSUB, sub), dtype=np.float32)
    for j in range(m):
        tables[j] = train_kmeans(pq_train[:, j * sub : (j + 1) * sub], KSUB, iters=train_iters, seed=pq_seeds[j])
    codebook = PqCodebook(tables)

    labels, _ = _assign_blas(x.astype(np.float64), c64)
    targets = x - centroids[labels] if residual else x
    codes = encode_pq(codebook, targets)

    id_base = base.id_base if isinstance(base, VectorDataset) else 0
    lists = []
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(nlist + 1))
    for lid in range(nlist):
        sel = order[bounds[lid] : bounds[lid + 1]]
        sel = np.sort(sel)
        lists.append(InvertedList(lid, sel.astype(np.int64) + id_base, np.ascontiguousarray(codes[sel])))
    return IvfPqIndex(dim, metric, residual, CoarseQuantizer(centroids), codebook, lists)


# ---------------------------------------------------------------------------
# Search

def _topk_by_distance(dists: np.ndarray, ids: np.ndarray, k: int):
    order = np.lexsort((ids, dists))[:k]
    return ids[order], dists[order]


def _search_one(index: IvfPqIndex, q: np.ndarray, params: SearchParams, base):
    cd = kernels.row_distances(q, index.coarse.centroids, index.metric)
    probe_order = np.lexsort((np.arange(index.nlist), cd))[: params.nprobe]

    shared_table = None
    if not index.residual:
        shared_table = build_adc_table(index.codebook, q, index.metric)

    dist_parts, id_parts, listing = [], [], []
    for lid in probe_order:
        lst = index.lists[int(lid)]
        listing.append((int(lid), len(lst.ids)))
        if len(lst.ids) == 0:
            continue
        if shared_table is not None:
            table, bias = shared_table
        else:
            table, bias = build_adc_table(index.codebook, q, index.metric, index.coarse.centroids[int(lid)])
        dist_parts.append(kernels.adc_accumulate(table, lst.codes, bias))
        id_parts.append(lst.ids)

    if dist_parts:
        all_d = np.concatenate(dist_parts)
        all_i = np.concatenate(id_parts)
    else:
        all_d = np.empty(0, np.float32)
        all_i = np.empty(0, np.int64)
    cand_ids, cand_d = _topk_by_distance(all_d, all_i, params.nrerank)

    if params.rerank:
        xb, id_base = base
        if len(cand_ids):
            exact = kernels.row_distances(q, xb[cand_ids - id_base], index.metric)
        else:
            exact = np.empty(0, np.float32)
        out_ids, out_d = _topk_by_distance(exact, cand_ids, params.k)
    else:
        out_ids, out_d = cand_ids[: params.k], cand_d[: params.k]

    if len(out_ids) < params.k:
        pad = params.k - len(out_ids)
        out_ids = np.concatenate([out_ids, np.full(pad, -1, np.int64)])
        out_d = np.concatenate([out_d, np.full(pad, np.inf, np.float32)])
    return out_ids, out_d, QueryTrace(listing, cand_ids)


def search(index: IvfPqIndex, query, params: SearchParams, base=None):
    """Single-query search; returns (ids, dists) of length k (id -1 pads)."""
    ids, dists, _ = _search_one(index, _check_query(index, query), params, _check_base(index, params, base))
    return ids, dists


def search_batch(index: IvfPqIndex, queries, params: SearchParams, base=None, threads: int = 1):
    """Batch search; returns (ids, dists, CandidateTrace), rows in query order.

    Results are independent of `threads` — each query is a pure function of
    the index and the canonical kernels.
    """
    xq = _as_matrix(queries)
    if xq.ndim != 2 or xq.shape[1] != index.dim:
        raise ValueError("query matrix does not match index dim")
    xb = _check_base(index, params, base)

    def one(i):
        return _search_one(index, xq[i], params, xb)

    nq = xq.shape[0]
    if threads > 1 and nq > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(nq)))
    else:
        results = [one(i) for i in range(nq)]
    ids = np.stack([r[0] for r in results]) if nq else np.empty((0, params.k), np.int64)
    dists = np.stack([r[1] for r in results]) if nq else np.empty((0, params.k), np.float32)
    return ids, dists, CandidateTrace([r[2] for r in results])


def _check_query(index, query) -> np.ndarray:
    q = np.ascontiguousarray(query, dtype=np.float32).ravel()
    if q.size != index.dim:
        raise ValueError("query does not match index dim")
    return q


def _check_base(index, params, base):
    if base is None:
        if params.rerank:
            raise ValueError("reranking requires the base vectors")
        return None
    xb = _as_matrix(base)
    if xb.shape[1] != index.dim:
        raise ValueError("base does not match index dim")
    id_base = base.id_base if isinstance(base, VectorDataset) else 0
    return xb, id_base


# ---------------------------------------------------------------------------
# Persistence: little-endian, versioned

def save_index(index: IvfPqIndex, path: str) -> None:
    metric_code = _METRICS.index(index.metric)
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(
            struct.pack(
                "<IBBHIIII",
                _VERSION,
                metric_code,
                1 if index.residual else 0,
                0,
                index.nlist,
                index.codebook.m,
                KSUB,
                index.dim,
            )
        )
        f.write(struct.pack("<Q", index.count))
        f.write(np.ascontiguousarray(index.coarse.centroids, dtype=np.float32).tobytes())
        f.write(np.ascontiguousarray(index.codebook.tables, dtype=np.float32).tobytes())
        for lst in index.lists:
            f.write(struct.pack("<Q", len(lst.ids)))
            f.write(np.ascontiguousarray(lst.ids, dtype=np.int64).tobytes())
            f.write(np.ascontiguousarray(lst.codes, dtype=np.uint8).tobytes())


def _read_exact(f, nbytes: int, what: str) -> bytes:
    buf = f.read(nbytes)
    if len(buf) != nbytes:
        raise FormatError(f"index file truncated while reading {what}")
    return buf


def load_index(path: str) -> IvfPqIndex:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != _MAGIC:
            raise FormatError("not an index file (bad magic)")
        version, metric_code, residual, _pad, nlist, m, ksub, dim = struct.unpack(
            "<IBBHIIII", _read_exact(f, 24, "header")
        )
        if version != _VERSION:
            raise FormatError(f"unsupported index version {version}")
        if metric_code >= len(_METRICS) or ksub != KSUB or m == 0 or dim % m:
            raise FormatError("corrupt index header")
        (count,) = struct.unpack("<Q", _read_exact(f, 8, "count"))
        sub = dim // m
        centroids = np.frombuffer(_read_exact(f, nlist * dim * 4, "centroids"), dtype="<f4").reshape(nlist, dim).copy()
        tables = np.frombuffer(_read_exact(f, m * ksub * sub * 4, "codebook"), dtype="<f4").reshape(m, ksub, sub).copy()
        lists = []
        total = 0
        for lid in range(nlist):
            (n,) = struct.unpack("<Q", _read_exact(f, 8, f"list {lid} length"))
            ids = np.frombuffer(_read_exact(f, n * 8, f"list {lid} ids"), dtype="<i8").copy()
            codes = np.frombuffer(_read_exact(f, n * m, f"list {lid} codes"), dtype=np.uint8).reshape(n, m).copy()
            lists.append(InvertedList(lid, ids, codes))
            total += n
        if total != count:
            raise FormatError("list contents disagree with header count")
        if f.read(1):
            raise FormatError("trailing bytes after index payload")
    return IvfPqIndex(dim, _METRICS[metric_code], bool(residual), CoarseQuantizer(centroids), PqCodebook(tables), lists)
