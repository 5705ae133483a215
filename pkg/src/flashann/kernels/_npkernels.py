"""NumPy fallback for the compiled kernels.

Bit-identical to ``_ckernels`` by construction: both accumulate in float64
(float32 for the table scan) in ascending index order and round once at the
end.  The fallback runs the reduction dimension as the outer Python loop, so
every element sees the same sequence of IEEE operations as the C loop; the
extension is compiled with ``-ffp-contract=off`` so no FMA can sneak in on
that side either.
"""

import numpy as np

# max float64 scratch elements per slab; keeps peak memory bounded without
# affecting results (rows are independent)
_CHUNK = 4_194_304


def _rows_per_slab(width):
    return max(1, _CHUNK // max(1, width))


def pairwise_sqeuclidean(a, b):
    n, d = a.shape
    m = b.shape[0]
    out = np.empty((n, m), dtype=np.float32)
    b64 = b.astype(np.float64)
    rows = _rows_per_slab(m)
    for s in range(0, n, rows):
        a64 = a[s : s + rows].astype(np.float64)
        acc = np.zeros((a64.shape[0], m), dtype=np.float64)
        for j in range(d):
            diff = a64[:, j, None] - b64[None, :, j]
            acc += diff * diff
        out[s : s + rows] = acc.astype(np.float32)
    if n == 0:
        out.shape = (0, m)
    return out


def pairwise_neg_inner(a, b):
    n, d = a.shape
    m = b.shape[0]
    out = np.empty((n, m), dtype=np.float32)
    b64 = b.astype(np.float64)
    rows = _rows_per_slab(m)
    for s in range(0, n, rows):
        a64 = a[s : s + rows].astype(np.float64)
        acc = np.zeros((a64.shape[0], m), dtype=np.float64)
        for j in range(d):
            acc += a64[:, j, None] * b64[None, :, j]
        out[s : s + rows] = (-acc).astype(np.float32)
    return out


def adc_table_sqeuclidean(targets, tables):
    m, c, s = tables.shape
    t64 = targets.astype(np.float64)
    w64 = tables.astype(np.float64)
    acc = np.zeros((m, c), dtype=np.float64)
    for t in range(s):
        diff = t64[:, t, None] - w64[:, :, t]
        acc += diff * diff
    return acc.astype(np.float32)


def adc_table_neg_inner(targets, tables):
    m, c, s = tables.shape
    t64 = targets.astype(np.float64)
    w64 = tables.astype(np.float64)
    acc = np.zeros((m, c), dtype=np.float64)
    for t in range(s):
        acc += t64[:, t, None] * w64[:, :, t]
    return (-acc).astype(np.float32)


def adc_accumulate(table, codes, init):
    n, m = codes.shape
    acc = np.full(n, np.float32(init), dtype=np.float32)
    for j in range(m):
        acc += table[j, codes[:, j]]
    return acc
