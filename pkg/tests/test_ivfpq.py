import numpy as np
import pytest

from flashann.datasets import brute_force_knn
from flashann.errors import FormatError
from flashann.ivfpq import (
    KSUB,
    SearchParams,
    build_adc_table,
    build_index,
    decode_pq,
    encode_pq,
    load_index,
    save_index,
    search,
    search_batch,
    train_kmeans,
)

from .oracles import adc_sum


def test_kmeans_inertia_history_non_increasing(rng):
    data = rng.standard_normal((600, 8), dtype=np.float32)
    centroids, history = train_kmeans(data, 12, seed=1, return_history=True)
    assert centroids.shape == (12, 8) and centroids.dtype == np.float32
    assert all(b <= a for a, b in zip(history, history[1:]))


def test_kmeans_deterministic(rng):
    data = rng.standard_normal((400, 6), dtype=np.float32)
    a = train_kmeans(data, 8, seed=5)
    b = train_kmeans(data, 8, seed=5)
    c = train_kmeans(data, 8, seed=6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_kmeans_survives_heavy_duplication():
    # more clusters than distinct points forces empty-cluster repair
    data = np.repeat(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], np.float32), 50, axis=0)
    centroids = train_kmeans(data, 8, seed=0)
    assert np.all(np.isfinite(centroids))


def test_encode_decode_reduces_error(rng):
    data = rng.standard_normal((1200, 16), dtype=np.float32)
    sub_centroids = [train_kmeans(data[:, 4 * j:4 * (j + 1)], KSUB, seed=j, iters=8) for j in range(4)]
    from flashann.ivfpq import PqCodebook

    cb = PqCodebook(np.stack(sub_centroids))
    codes = encode_pq(cb, data)
    assert codes.shape == (1200, 4) and codes.dtype == np.uint8
    recon = decode_pq(cb, codes)
    err = float(((recon - data) ** 2).sum(axis=1).mean())
    baseline = float((data ** 2).sum(axis=1).mean())
    assert err < baseline * 0.5


def test_adc_table_prices_codes_like_decode(rng):
    data = rng.standard_normal((800, 8), dtype=np.float32)
    from flashann.ivfpq import PqCodebook

    cb = PqCodebook(np.stack([train_kmeans(data[:, 4 * j:4 * (j + 1)], KSUB, seed=j, iters=6) for j in range(2)]))
    codes = encode_pq(cb, data[:32])
    q = rng.standard_normal(8, dtype=np.float32)
    table, bias = build_adc_table(cb, q, metric="l2")
    # table lookup sum approximates the decoded distance and is exactly the
    # float32 fold of the table entries
    for i in range(32):
        scanned = adc_sum(table, codes[i], init=bias)
        decoded = decode_pq(cb, codes[i:i + 1])[0]
        exact = float(((q - decoded) ** 2).sum())
        assert scanned == pytest.approx(exact, rel=1e-4, abs=1e-3)


def test_build_index_validations(rng):
    data = rng.standard_normal((500, 12), dtype=np.float32)
    with pytest.raises(ValueError):
        build_index(data, nlist=8, m=5, seed=0)  # 5 does not divide 12
    with pytest.raises(ValueError):
        build_index(data, nlist=600, m=4, seed=0)  # more lists than points
    with pytest.raises(ValueError):
        build_index(data[:100], nlist=4, m=4, seed=0)  # under KSUB train points


def test_index_lists_cover_dataset(small_index):
    total = sum(l.ids.size for l in small_index.lists)
    assert total == small_index.count == 2000
    for lst in small_index.lists:
        assert np.all(np.diff(lst.ids) > 0)  # ascending, unique
        assert lst.codes.shape == (lst.ids.size, small_index.codebook.m)


def test_full_probe_with_full_rerank_equals_brute_force(clustered_data, small_index):
    base, queries = clustered_data
    params = SearchParams(k=10, nprobe=small_index.nlist, nrerank=base.shape[0], rerank=True)
    ids, dists, _ = search_batch(small_index, queries, params, base=base)
    gt = brute_force_knn(base, queries, 10)
    assert np.array_equal(ids, gt.neighbors)
    assert np.array_equal(dists, gt.distances)


def test_tied_duplicates_rank_by_id(rng):
    base = rng.standard_normal((700, 8), dtype=np.float32)
    base[11] = base[407]
    base[3] = base[407]
    index = build_index(base, nlist=8, m=4, seed=2)
    q = base[407]
    params = SearchParams(k=4, nprobe=8, nrerank=700, rerank=True)
    ids, dists = search(index, q, params, base=base)
    assert list(ids[:3]) == [3, 11, 407]
    assert dists[0] == dists[1] == dists[2] == 0.0


def test_rerank_requires_base(small_index, clustered_data):
    _, queries = clustered_data
    params = SearchParams(k=5, nprobe=4, nrerank=50, rerank=True)
    with pytest.raises(ValueError):
        search_batch(small_index, queries, params)


def test_no_rerank_returns_sorted_quantized_distances(small_index, clustered_data):
    _, queries = clustered_data
    params = SearchParams(k=10, nprobe=4, nrerank=100, rerank=False)
    ids, dists, trace = search_batch(small_index, queries, params)
    for row_i, row_d in zip(ids, dists):
        valid = row_i >= 0
        assert np.all(np.diff(row_d[valid]) >= 0)
    counts = trace.candidate_counts()
    assert np.all(counts <= 100)


def test_padding_when_probes_run_dry(clustered_data, small_index):
    base, queries = clustered_data
    params = SearchParams(k=200, nprobe=1, nrerank=200, rerank=True)
    ids, dists, trace = search_batch(small_index, queries, params, base=base)
    for qi in range(len(queries)):
        n_cand = trace.queries[qi].candidate_ids.size
        if n_cand < 200:
            assert np.all(ids[qi, n_cand:] == -1)
            assert np.all(np.isinf(dists[qi, n_cand:]))


def test_trace_counts_scanned_codes(small_index, clustered_data):
    _, queries = clustered_data
    params = SearchParams(k=5, nprobe=3, nrerank=64, rerank=False)
    _, _, trace = search_batch(small_index, queries, params)
    sizes = {l.list_id: l.ids.size for l in small_index.lists}
    for qt in trace.queries:
        assert len(qt.lists) == 3
        assert qt.scanned == sum(count for _, count in qt.lists)
        for list_id, count in qt.lists:
            assert sizes[list_id] == count


def test_threads_do_not_change_results(small_index, clustered_data):
    base, queries = clustered_data
    params = SearchParams(k=10, nprobe=6, nrerank=80, rerank=True)
    a = search_batch(small_index, queries, params, base=base, threads=1)
    b = search_batch(small_index, queries, params, base=base, threads=4)
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])


def test_search_params_validation():
    with pytest.raises(ValueError):
        SearchParams(k=0, nprobe=1, nrerank=10)
    with pytest.raises(ValueError):
        SearchParams(k=5, nprobe=0, nrerank=10)
    with pytest.raises(ValueError):
        SearchParams(k=20, nprobe=1, nrerank=10, rerank=True)  # k > nrerank
    SearchParams(k=20, nprobe=1, nrerank=10, rerank=False)  # fine without rerank


def test_ip_metric_full_probe_matches_brute_force(rng):
    base = rng.standard_normal((900, 16), dtype=np.float32)
    queries = rng.standard_normal((8, 16), dtype=np.float32)
    index = build_index(base, nlist=16, m=4, seed=3, metric="ip")
    params = SearchParams(k=7, nprobe=16, nrerank=900, rerank=True)
    ids, dists, _ = search_batch(index, queries, params, base=base)
    gt = brute_force_knn(base, queries, 7, metric="ip")
    assert np.array_equal(ids, gt.neighbors)
    assert np.array_equal(dists, gt.distances)


def test_raw_encoding_variant_works(rng):
    base = rng.standard_normal((600, 8), dtype=np.float32)
    queries = rng.standard_normal((5, 8), dtype=np.float32)
    index = build_index(base, nlist=8, m=4, seed=1, residual=False)
    params = SearchParams(k=5, nprobe=8, nrerank=600, rerank=True)
    ids, _, _ = search_batch(index, queries, params, base=base)
    gt = brute_force_knn(base, queries, 5)
    assert np.array_equal(ids, gt.neighbors)


def test_save_load_roundtrip(tmp_path, small_index, clustered_data):
    base, queries = clustered_data
    path = tmp_path / "ix.fxiv"
    save_index(small_index, str(path))
    loaded = load_index(str(path))
    assert loaded.nlist == small_index.nlist
    assert loaded.metric == small_index.metric
    params = SearchParams(k=10, nprobe=5, nrerank=60, rerank=True)
    a = search_batch(small_index, queries, params, base=base)
    b = search_batch(loaded, queries, params, base=base)
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])
    # serialization is canonical: a second save produces identical bytes
    path2 = tmp_path / "ix2.fxiv"
    save_index(loaded, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_load_rejects_corruption(tmp_path, small_index):
    path = tmp_path / "ix.fxiv"
    save_index(small_index, str(path))
    blob = path.read_bytes()

    bad_magic = tmp_path / "a.fxiv"
    bad_magic.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError):
        load_index(str(bad_magic))

    truncated = tmp_path / "b.fxiv"
    truncated.write_bytes(blob[:-9])
    with pytest.raises(FormatError):
        load_index(str(truncated))

    trailing = tmp_path / "c.fxiv"
    trailing.write_bytes(blob + b"\x00")
    with pytest.raises(FormatError):
        load_index(str(trailing))
