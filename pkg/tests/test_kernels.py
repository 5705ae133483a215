import os
import subprocess
import sys

import numpy as np
import pytest

from flashann import kernels
from flashann.kernels import _npkernels

from .oracles import adc_sum, neg_ip, sq_l2

try:
    from flashann.kernels import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def test_pairwise_sqeuclidean_matches_fold_left_oracle(rng):
    a = rng.standard_normal((7, 5), dtype=np.float32)
    b = rng.standard_normal((9, 5), dtype=np.float32)
    got = kernels.pairwise_sqeuclidean(a, b)
    assert got.dtype == np.float32 and got.shape == (7, 9)
    for i in range(7):
        for j in range(9):
            assert got[i, j] == sq_l2(a[i], b[j])


def test_pairwise_neg_inner_matches_fold_left_oracle(rng):
    a = rng.standard_normal((4, 11), dtype=np.float32)
    b = rng.standard_normal((6, 11), dtype=np.float32)
    got = kernels.pairwise_neg_inner(a, b)
    for i in range(4):
        for j in range(6):
            assert got[i, j] == neg_ip(a[i], b[j])


def test_adc_accumulate_matches_float32_oracle(rng):
    table = rng.standard_normal((8, 256), dtype=np.float32)
    codes = rng.integers(0, 256, size=(40, 8), dtype=np.uint8)
    got = kernels.adc_accumulate(table, codes, init=0.25)
    for i in range(40):
        assert got[i] == adc_sum(table, codes[i], init=0.25)


def test_adc_tables_consistent_with_pairwise(rng):
    tables = rng.standard_normal((4, 256, 6), dtype=np.float32)
    targets = rng.standard_normal((4, 6), dtype=np.float32)
    per_sub = kernels.adc_table_sqeuclidean(targets, tables)
    assert per_sub.shape == (4, 256)
    for j in range(4):
        expect = kernels.pairwise_sqeuclidean(targets[j:j + 1], tables[j])[0]
        assert np.array_equal(per_sub[j], expect)
    neg = kernels.adc_table_neg_inner(targets, tables)
    for j in range(4):
        expect = kernels.pairwise_neg_inner(targets[j:j + 1], tables[j])[0]
        assert np.array_equal(neg[j], expect)


@needs_ext
def test_backends_bit_identical(rng):
    for trial in range(25):
        n = int(rng.integers(1, 40))
        m = int(rng.integers(1, 40))
        d = int(rng.integers(1, 24))
        a = rng.standard_normal((n, d), dtype=np.float32) * 10
        b = rng.standard_normal((m, d), dtype=np.float32) * 10
        assert np.array_equal(_ckernels.pairwise_sqeuclidean(a, b),
                              _npkernels.pairwise_sqeuclidean(a, b))
        assert np.array_equal(_ckernels.pairwise_neg_inner(a, b),
                              _npkernels.pairwise_neg_inner(a, b))
        msub = int(rng.integers(1, 6))
        sub = int(rng.integers(1, 9))
        tables = rng.standard_normal((msub, 256, sub), dtype=np.float32)
        targets = rng.standard_normal((msub, sub), dtype=np.float32)
        assert np.array_equal(_ckernels.adc_table_sqeuclidean(targets, tables),
                              _npkernels.adc_table_sqeuclidean(targets, tables))
        assert np.array_equal(_ckernels.adc_table_neg_inner(targets, tables),
                              _npkernels.adc_table_neg_inner(targets, tables))
        table = rng.standard_normal((msub, 256), dtype=np.float32)
        codes = rng.integers(0, 256, size=(n, msub), dtype=np.uint8)
        assert np.array_equal(_ckernels.adc_accumulate(table, codes, 0.5),
                              _npkernels.adc_accumulate(table, codes, 0.5))


def test_accumulation_order_is_ascending_not_pairwise(rng):
    # catch "fast math" style reassociation: a permuted input must give the
    # permuted-fold result, not the same rounding as the original order
    a = (rng.standard_normal(257) * 100).astype(np.float32)
    b = np.zeros(257, dtype=np.float32)
    direct = kernels.pairwise_sqeuclidean(a[None, :], b[None, :])[0, 0]
    assert direct == sq_l2(a, b)


def test_row_distances_metric_switch(rng):
    q = rng.standard_normal(8, dtype=np.float32)
    x = rng.standard_normal((5, 8), dtype=np.float32)
    l2 = kernels.row_distances(q, x, metric="l2")
    ip = kernels.row_distances(q, x, metric="ip")
    assert np.array_equal(l2, kernels.pairwise_sqeuclidean(q[None], x)[0])
    assert np.array_equal(ip, kernels.pairwise_neg_inner(q[None], x)[0])
    with pytest.raises(ValueError):
        kernels.row_distances(q, x, metric="cosine")


def test_shape_validation():
    with pytest.raises(ValueError):
        kernels.pairwise_sqeuclidean(np.zeros(3, np.float32), np.zeros((2, 3), np.float32))
    with pytest.raises(ValueError):
        kernels.adc_accumulate(np.zeros((2, 256), np.float32), np.zeros(4, np.uint8))


def test_force_numpy_env_selects_fallback():
    env = dict(os.environ)
    env["FLASHANN_FORCE_NUMPY"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", "from flashann import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "numpy"
