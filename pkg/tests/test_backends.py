import pytest

from flashann.backends import (
    HbfBackend,
    LinkBackend,
    LinkModel,
    make_backend,
    pipeline_cost,
)
from flashann.calibration import load_nand_calibration
from flashann.errors import ModelConfigError
from flashann.nand import BASELINE_CONFIG, stack_model
from flashann.nss import NssConfig, rerank_timing


def test_dram_cost_hand_computed():
    dram = make_backend("dram")
    assert isinstance(dram, LinkBackend)
    # 64 queries x 500 candidates, 64-dim float32: 256 B -> 4 cachelines
    cost = dram.rerank_cost([500] * 64, dim=64)
    assert cost.candidates == 32_000
    assert cost.bytes_read == 32_000 * 256
    transfer = max(8_192_000 / 25_000.0, 8_192_000 / 100_000.0, 32_000 * 0.06 / 16)
    assert transfer == pytest.approx(327.68)
    assert cost.time_us == pytest.approx(2 * 5.0 + 32_000 * 0.2 + transfer)
    assert cost.energy_pj is None


def test_ssd_cost_hand_computed():
    ssd = make_backend("ssd")
    # every 256 B vector rounds up to a 4 KB block read
    cost = ssd.rerank_cost([500] * 64, dim=64)
    assert cost.bytes_read == 32_000 * 4096
    transfer = max(131_072_000 / 25_000.0, 131_072_000 / 7_000.0, 32_000 * 80.0 / 64)
    assert transfer == 40_000.0  # latency-bound at this queue depth
    assert cost.time_us == pytest.approx(10.0 + 32_000 * 1.0 + transfer)


def test_granularity_rounding():
    dram = make_backend("dram")
    cost = dram.rerank_cost([10], dim=1)  # 4 B vector still reads a cacheline
    assert cost.bytes_read == 10 * 64
    ssd = make_backend("ssd")
    cost = ssd.rerank_cost([10], dim=1100)  # 4400 B vector -> two blocks
    assert cost.bytes_read == 10 * 8192


def test_empty_batch_is_free():
    dram = make_backend("dram")
    cost = dram.rerank_cost([], dim=64)
    assert cost.time_us == 0.0 and cost.bytes_read == 0
    cost = dram.rerank_cost([0, 0], dim=64)
    assert cost.time_us == 0.0


def test_link_model_validation():
    with pytest.raises(ValueError):
        LinkModel(0.0, 5.0, 7.0, 80.0, 4096, 1.0, 64)
    with pytest.raises(ValueError):
        LinkModel(25.0, 5.0, 7.0, 80.0, 4096, 1.0, 0)
    dram = make_backend("dram")
    with pytest.raises(ValueError):
        dram.rerank_cost([-5], dim=8)


def test_hbf_backend_delegates_to_search_unit():
    hbf = make_backend("hbf")
    assert isinstance(hbf, HbfBackend)
    expected_stack = stack_model(load_nand_calibration(), BASELINE_CONFIG)
    assert hbf.stack == expected_stack
    counts = [300] * 16
    cost = hbf.rerank_cost(counts, dim=64)
    t = rerank_timing(NssConfig(), expected_stack, counts, 64)
    assert cost.time_us == t.time_us
    assert cost.bytes_read == t.bytes_read
    assert cost.energy_pj == t.energy_pj


def test_unknown_backend_rejected():
    with pytest.raises(ModelConfigError):
        make_backend("optane")


def test_backend_ordering_on_a_rerank_batch():
    counts = [500] * 64
    times = {name: make_backend(name).rerank_cost(counts, dim=64).time_us
             for name in ("dram", "ssd", "hbf")}
    assert times["hbf"] < times["dram"] < times["ssd"]


def test_pipeline_cost_exact():
    pc = pipeline_cost(64, 1.0, 2.0, 7.0)
    assert pc.latency_ms == 10.0
    assert pc.qps == 6400.0
    assert pc.qps_overlapped == 64 * 1000.0 / 7.0


def test_pipeline_cost_validation():
    with pytest.raises(ValueError):
        pipeline_cost(0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        pipeline_cost(4, -1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        pipeline_cost(4, 0.0, 0.0, 0.0)
