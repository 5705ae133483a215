"""Vector dataset I/O, synthetic generation, and exact k-NN ground truth.

File formats are the classic little-endian framed records used by the ANN
benchmark corpora: each row is ``[int32 dim][dim x element]`` with float32
elements for ``.fvecs``, uint8 for ``.bvecs``, and int32 for ``.ivecs``.
An empty file is a valid dataset with dim 0 and count 0.

All distances are squared L2 (or negated inner product) in float32; uint8
data is widened to float32 at the distance boundary.  Ties anywhere in
ranking break toward the ascending vector id.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import FormatError

_FORMATS = {
    "fvecs": (np.float32, "float32"),
    "bvecs": (np.uint8, "uint8"),
    "ivecs": (np.int32, "int32"),
}
_KIND_TO_FORMAT = {kind: fmt for fmt, (_, kind) in _FORMATS.items()}


@dataclass
class VectorDataset:
    dim: int
    count: int
    element_kind: str  # "float32" | "uint8" | "int32"
    data: np.ndarray  # (count, dim)
    id_base: int = 0

    def __post_init__(self):
        if self.element_kind not in _KIND_TO_FORMAT:
            raise ValueError(f"unknown element kind: {self.element_kind!r}")
        if self.data.shape != (self.count, self.dim):
            raise ValueError("data shape does not match (count, dim)")

    def as_float32(self) -> np.ndarray:
        if self.data.dtype == np.float32:
            return self.data
        return self.data.astype(np.float32)


@dataclass
class GroundTruth:
    k: int
    neighbors: np.ndarray  # (nq, k) int64 ids
    distances: np.ndarray  # (nq, k) float32, the minimized quantity

    def __post_init__(self):
        if self.neighbors.shape != self.distances.shape:
            raise ValueError("neighbors/distances shape mismatch")
        if self.neighbors.shape[1] != self.k:
            raise ValueError("k does not match matrix width")


def _infer_format(path: str) -> str:
    ext = os.path.splitext(path)[1].lstrip(".")
    if ext not in _FORMATS:
        raise ValueError(f"cannot infer format from {path!r}; pass fmt=")
    return ext


def load_vectors(path: str, fmt: str | None = None) -> VectorDataset:
    """Load a framed vector file.  Empty file -> dim 0, count 0."""
    fmt = fmt or _infer_format(path)
    if fmt not in _FORMATS:
        raise ValueError(f"unknown format: {fmt!r}")
    dtype, kind = _FORMATS[fmt]
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        return VectorDataset(0, 0, kind, np.empty((0, 0), dtype=dtype))
    if raw.size < 4:
        raise FormatError(f"{path}: truncated header")
    dim = int(raw[:4].view(np.int32)[0])
    if dim <= 0:
        raise FormatError(f"{path}: bad leading dimension {dim}")
    row_bytes = 4 + dim * dtype().itemsize
    if raw.size % row_bytes != 0:
        raise FormatError(f"{path}: size {raw.size} not a multiple of record size {row_bytes}")
    rows = raw.reshape(-1, row_bytes)
    dims = rows[:, :4].copy().view(np.int32).ravel()
    if not np.all(dims == dim):
        raise FormatError(f"{path}: inconsistent per-record dimensions")
    data = rows[:, 4:].copy().view(dtype).reshape(-1, dim)
    return VectorDataset(dim, data.shape[0], kind, data)


def save_vectors(ds: VectorDataset | np.ndarray, path: str, fmt: str | None = None) -> None:
    if isinstance(ds, np.ndarray):
        kind = {np.dtype(np.float32): "float32", np.dtype(np.uint8): "uint8", np.dtype(np.int32): "int32"}.get(ds.dtype)
        if kind is None:
            raise ValueError(f"unsupported array dtype {ds.dtype}")
        ds = VectorDataset(ds.shape[1], ds.shape[0], kind, ds)
    fmt = fmt or _infer_format(path)
    dtype, kind = _FORMATS[fmt]
    if kind != ds.element_kind:
        raise ValueError(f"dataset kind {ds.element_kind} does not match format {fmt}")
    if ds.count == 0:
        with open(path, "wb"):
            pass
        return
    headers = np.full((ds.count, 1), ds.dim, dtype=np.int32)
    rows = np.hstack([headers.view(np.uint8), np.ascontiguousarray(ds.data, dtype=dtype).view(np.uint8).reshape(ds.count, -1)])
    rows.tofile(path)


def save_ground_truth(gt: GroundTruth, ids_path: str, dists_path: str) -> None:
    save_vectors(gt.neighbors.astype(np.int32), ids_path, fmt="ivecs")
    save_vectors(np.ascontiguousarray(gt.distances, dtype=np.float32), dists_path, fmt="fvecs")


def load_ground_truth(ids_path: str, dists_path: str) -> GroundTruth:
    ids = load_vectors(ids_path, fmt="ivecs")
    dists = load_vectors(dists_path, fmt="fvecs")
    if ids.data.shape != dists.data.shape:
        raise FormatError("ground-truth id/distance shapes differ")
    return GroundTruth(ids.dim, ids.data.astype(np.int64), dists.data)


def generate_synthetic(
    count: int,
    dim: int,
    seed: int,
    distribution: str = "gaussian-mixture",
    clusters: int = 16,
    element_kind: str = "float32",
) -> VectorDataset:
    """Deterministic synthetic vectors; gaussian-mixture gives PQ something to quantize."""
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        x = rng.random((count, dim))
    elif distribution == "gaussian-mixture":
        centers = rng.normal(0.0, 4.0, size=(clusters, dim))
        assign = rng.integers(0, clusters, size=count)
        x = centers[assign] + rng.normal(0.0, 1.0, size=(count, dim))
    else:
        raise ValueError(f"unknown distribution: {distribution!r}")
    if element_kind == "float32":
        data = x.astype(np.float32)
    elif element_kind == "uint8":
        lo, hi = x.min() if count else 0.0, x.max() if count else 1.0
        span = (hi - lo) or 1.0
        data = np.clip(np.round((x - lo) / span * 255.0), 0, 255).astype(np.uint8)
    else:
        raise ValueError(f"unsupported element kind: {element_kind!r}")
    return VectorDataset(dim, count, element_kind, data)


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, VectorDataset):
        return x.as_float32()
    return np.ascontiguousarray(x, dtype=np.float32)


def brute_force_knn(base, queries, k: int, metric: str = "l2", threads: int = 1) -> GroundTruth:
    """Exact top-k by full scan through the canonical distance kernel.

    Shares the kernel with the rerank path, so reranked results match this
    oracle bit for bit.
    """
    xb = _as_matrix(base)
    xq = _as_matrix(queries)
    if xb.shape[0] < k:
        raise ValueError(f"k={k} exceeds base size {xb.shape[0]}")
    if xq.shape[1] != xb.shape[1]:
        raise ValueError("query/base dimensionality mismatch")
    id_base = base.id_base if isinstance(base, VectorDataset) else 0
    ids = np.arange(xb.shape[0], dtype=np.int64)

    def one(qi: int):
        d = kernels.row_distances(xq[qi], xb, metric)
        order = np.lexsort((ids, d))[:k]
        return ids[order] + id_base, d[order]

    nq = xq.shape[0]
    if threads > 1 and nq > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(nq)))
    else:
        results = [one(qi) for qi in range(nq)]
    neighbors = np.stack([r[0] for r in results]) if nq else np.empty((0, k), np.int64)
    dists = np.stack([r[1] for r in results]) if nq else np.empty((0, k), np.float32)
    return GroundTruth(k, neighbors, dists)


def recall_at_k(result_ids, truth: GroundTruth, k: int) -> float:
    """Mean fraction of the true top-k found in each result list."""
    ids = np.asarray(result_ids)
    if ids.ndim != 2 or ids.shape[0] != truth.neighbors.shape[0]:
        raise ValueError("result/truth shape mismatch")
    if truth.k < k:
        raise ValueError(f"ground truth only covers k={truth.k}")
    hits = 0
    for row, true_row in zip(ids, truth.neighbors[:, :k]):
        hits += np.isin(true_row, row[:k], assume_unique=False).sum()
    return float(hits / (ids.shape[0] * k)) if ids.shape[0] else 0.0
