"""Distance/scan kernels with a compiled core and a NumPy fallback.

The compiled extension is preferred when importable; ``FLASHANN_FORCE_NUMPY=1``
forces the fallback (used by the benchmark and the equivalence tests).  Both
implementations follow the same arithmetic contract, so everything built on
top of them — indexes, ground truth, search results — is identical bit for
bit whichever one is active.  ``BACKEND`` names the selected implementation.
"""

import os

import numpy as np

from . import _npkernels

if os.environ.get("FLASHANN_FORCE_NUMPY"):
    _impl = _npkernels
    BACKEND = "numpy"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _npkernels
        BACKEND = "numpy"


def _f32(x, ndim):
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if arr.ndim != ndim:
        raise ValueError(f"expected {ndim}-d float array, got shape {arr.shape}")
    return arr


def pairwise_sqeuclidean(a, b):
    """Squared L2 distances between rows of `a` and rows of `b`, float32."""
    return _impl.pairwise_sqeuclidean(_f32(a, 2), _f32(b, 2))


def pairwise_neg_inner(a, b):
    """Negated inner products between rows of `a` and rows of `b`, float32."""
    return _impl.pairwise_neg_inner(_f32(a, 2), _f32(b, 2))


def adc_table_sqeuclidean(targets, tables):
    """Per-subspace squared L2 from `targets[j]` to every codeword in `tables[j]`."""
    return _impl.adc_table_sqeuclidean(_f32(targets, 2), _f32(tables, 3))


def adc_table_neg_inner(targets, tables):
    return _impl.adc_table_neg_inner(_f32(targets, 2), _f32(tables, 3))


def adc_accumulate(table, codes, init=0.0):
    """Lookup-sum `table[j, codes[i, j]]` over j, float32, starting from `init`."""
    codes = np.ascontiguousarray(codes, dtype=np.uint8)
    if codes.ndim != 2:
        raise ValueError("codes must be 2-d")
    return _impl.adc_accumulate(_f32(table, 2), codes, float(init))


def row_distances(q, x, metric="l2"):
    """Distances from a single query to the rows of `x` under `metric`.

    Inner product is negated so every caller minimizes (ties and top-k logic
    stay identical across metrics).
    """
    q2 = np.ascontiguousarray(q, dtype=np.float32).reshape(1, -1)
    if metric == "l2":
        return pairwise_sqeuclidean(q2, x)[0]
    if metric == "ip":
        return pairwise_neg_inner(q2, x)[0]
    raise ValueError(f"unknown metric: {metric!r}")
