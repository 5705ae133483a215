"""Slow, independent reference implementations used to pin down expected
values.  Everything here is deliberately written in plain Python loops so a
bug in the library's vectorized code cannot hide in a shared formula.

The arithmetic contract being checked:

* pairwise distances accumulate in float64, ascending index order, one
  rounding to float32 at the end;
* ADC lookup sums accumulate in float32, ascending subquantizer order;
* every ranking breaks ties by ascending vector id.
"""

import numpy as np


def sq_l2(a, b) -> np.float32:
    acc = 0.0
    for x, y in zip(a, b):
        d = float(x) - float(y)
        acc += d * d
    return np.float32(acc)


def neg_ip(a, b) -> np.float32:
    acc = 0.0
    for x, y in zip(a, b):
        acc += float(x) * float(y)
    return np.float32(-acc)


def adc_sum(table, codes, init=0.0) -> np.float32:
    acc = np.float32(init)
    for j in range(len(codes)):
        acc = np.float32(acc + np.float32(table[j, int(codes[j])]))
    return acc


def topk_by_distance(dists, ids, k):
    """(distance, id)-lexicographic top-k, the tie rule used everywhere."""
    pairs = sorted(zip([float(d) for d in dists], [int(i) for i in ids]))
    pairs = pairs[:k]
    return (
        np.array([d for d, _ in pairs], dtype=np.float32),
        np.array([i for _, i in pairs], dtype=np.int64),
    )


def knn(base, queries, k, metric="l2"):
    """Exact k-NN via the plain-Python distance fold."""
    dist = sq_l2 if metric == "l2" else neg_ip
    out_ids = np.empty((len(queries), k), dtype=np.int64)
    out_d = np.empty((len(queries), k), dtype=np.float32)
    for qi, q in enumerate(queries):
        ds = [dist(q, row) for row in base]
        d, i = topk_by_distance(ds, range(len(base)), k)
        out_d[qi] = d
        out_ids[qi] = i
    return out_ids, out_d
