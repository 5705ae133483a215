"""Analytic model of a re-architected 3D NAND die built from many small,
independently accessible subarrays, stacked 8-high behind an HBM-class
interface.

The model is deliberately first-order:

* capacity comes straight from the geometry
  (``page_bytes*8 * wl_layers*ssl*sub_blocks * blocks * bits_per_cell``);
* read energy per bit is linear, ``alpha + beta*page_bytes +
  gamma*blocks*wl_layers`` — bigger pages load longer bitlines, more
  blocks-per-wordline-stack add parasitics;
* read latency mirrors that shape with its own coefficients;
* sustained bandwidth is the stack power envelope divided by energy per bit,
  clamped at the interface limit;
* die capacity divides usable die area by effective subarray area, which
  carries a fractional periphery overhead, a fixed per-subarray periphery
  floor (decoders/pumps do not shrink with page size), and a wordline
  staircase strip amortized across a row of subarrays.

Coefficients live in ``calibration/nand.yaml`` and are fitted to the public
anchor points: 30 pJ/bit and 125 GB/s at the (4 KB page, 64 block, 256
layer) baseline, a 460 GB/s interface clamp, at least 512 GB per 8-die
stack at 128 layers and less than that at 64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .units import GBPS_PER_W_PER_PJBIT

GRID_WL_LAYERS = (64, 128, 192, 256)
GRID_PAGE_BYTES = (1024, 2048, 4096)
GRID_BLOCKS = (64, 128, 256, 512, 1024)

BASELINE_WL_LAYERS = 256
BASELINE_PAGE_BYTES = 4096
BASELINE_BLOCKS = 64


@dataclass(frozen=True)
class NandPhysicalParams:
    vc_hole_diameter_nm: float = 145.0
    bl_pitch_nm: float = 40.0
    vc_hole_pitch_nm: float = 248.0
    wl_staircase_pitch_nm: float = 725.0
    ssl_count: int = 2
    sub_block_count: int = 2
    bits_per_cell: int = 1


@dataclass(frozen=True)
class EnergyCoeffs:
    alpha_pj: float
    beta_pj_per_byte: float
    gamma_pj: float  # multiplies blocks * wl_layers


@dataclass(frozen=True)
class LatencyCoeffs:
    t_sense_us: float
    rho_bl_us_per_byte: float
    rho_wl_us: float  # multiplies blocks * wl_layers


@dataclass(frozen=True)
class AreaParams:
    periphery_fraction: float
    periphery_fixed_mm2: float
    staircase_share: int
    die_area_mm2: float
    tsv_region_mm2: float


@dataclass(frozen=True)
class StackParams:
    dies: int = 8
    power_envelope_w: float = 30.0
    interface_cap_gb_s: float = 460.0
    latency_adder_us: float = 0.5


@dataclass(frozen=True)
class NandCalibration:
    phys: NandPhysicalParams
    energy: EnergyCoeffs
    latency: LatencyCoeffs
    area: AreaParams
    stack: StackParams


@dataclass(frozen=True)
class NandSubarrayConfig:
    wl_layers: int
    page_bytes: int
    blocks_per_subarray: int

    def __post_init__(self):
        if self.wl_layers <= 0 or self.page_bytes <= 0 or self.blocks_per_subarray <= 0:
            raise ValueError("subarray geometry values must be positive")


BASELINE_CONFIG = NandSubarrayConfig(BASELINE_WL_LAYERS, BASELINE_PAGE_BYTES, BASELINE_BLOCKS)


@dataclass(frozen=True)
class SubarrayMetrics:
    capacity_bits: int
    read_energy_pj_per_bit: float
    read_latency_us: float
    area_mm2: float  # effective, periphery included


@dataclass(frozen=True)
class DieCapacity:
    subarrays_per_die: int
    capacity_bytes: int


@dataclass(frozen=True)
class HbfStackModel:
    dies: int
    subarrays_per_die: int
    capacity_bytes: int
    read_energy_pj_per_bit: float
    sustained_read_bw_gb_s: float
    access_latency_us: float  # subarray read + stack adder
    power_envelope_w: float
    interface_cap_gb_s: float
    page_bytes: int
    blocks_per_subarray: int
    wl_layers: int
    pages_per_block: int


def pages_per_block(phys: NandPhysicalParams, cfg: NandSubarrayConfig) -> int:
    return cfg.wl_layers * phys.ssl_count * phys.sub_block_count


def subarray_metrics(cal: NandCalibration, cfg: NandSubarrayConfig) -> SubarrayMetrics:
    phys = cal.phys
    ppb = pages_per_block(phys, cfg)
    capacity_bits = cfg.page_bytes * 8 * ppb * cfg.blocks_per_subarray * phys.bits_per_cell

    coupling = cfg.blocks_per_subarray * cfg.wl_layers
    energy = cal.energy.alpha_pj + cal.energy.beta_pj_per_byte * cfg.page_bytes + cal.energy.gamma_pj * coupling
    latency = (
        cal.latency.t_sense_us
        + cal.latency.rho_bl_us_per_byte * cfg.page_bytes
        + cal.latency.rho_wl_us * coupling
    )

    nm_to_mm = 1e-6
    x_mm = cfg.page_bytes * 8 * phys.bl_pitch_nm * nm_to_mm
    hole_rows = phys.ssl_count * phys.sub_block_count
    y_mm = (
        cfg.blocks_per_subarray * hole_rows * phys.vc_hole_pitch_nm
        + cfg.wl_layers * phys.wl_staircase_pitch_nm / cal.area.staircase_share
    ) * nm_to_mm
    raw = x_mm * y_mm
    area = raw * (1.0 + cal.area.periphery_fraction) + cal.area.periphery_fixed_mm2
    return SubarrayMetrics(capacity_bits, energy, latency, area)


def die_capacity(
    cal: NandCalibration,
    cfg: NandSubarrayConfig,
    die_area_mm2: float | None = None,
    tsv_region_mm2: float | None = None,
) -> DieCapacity:
    die_area = cal.area.die_area_mm2 if die_area_mm2 is None else die_area_mm2
    tsv = cal.area.tsv_region_mm2 if tsv_region_mm2 is None else tsv_region_mm2
    usable = die_area - tsv
    if usable <= 0:
        raise ValueError("TSV region consumes the whole die")
    m = subarray_metrics(cal, cfg)
    n = math.floor(usable / m.area_mm2)
    return DieCapacity(n, n * m.capacity_bits // 8)


def power_constrained_bandwidth(
    energy_pj_per_bit: float,
    power_envelope_w: float = 30.0,
    interface_cap_gb_s: float = 460.0,
) -> float:
    """Sustained read bandwidth in decimal GB/s; raw value clamps at the interface."""
    if energy_pj_per_bit <= 0:
        raise ValueError("energy per bit must be positive")
    raw = GBPS_PER_W_PER_PJBIT * power_envelope_w / energy_pj_per_bit
    return min(raw, interface_cap_gb_s)


def stack_model(cal: NandCalibration, cfg: NandSubarrayConfig, dies: int | None = None) -> HbfStackModel:
    dies = cal.stack.dies if dies is None else dies
    m = subarray_metrics(cal, cfg)
    die = die_capacity(cal, cfg)
    bw = power_constrained_bandwidth(
        m.read_energy_pj_per_bit, cal.stack.power_envelope_w, cal.stack.interface_cap_gb_s
    )
    return HbfStackModel(
        dies=dies,
        subarrays_per_die=die.subarrays_per_die,
        capacity_bytes=dies * die.capacity_bytes,
        read_energy_pj_per_bit=m.read_energy_pj_per_bit,
        sustained_read_bw_gb_s=bw,
        access_latency_us=m.read_latency_us + cal.stack.latency_adder_us,
        power_envelope_w=cal.stack.power_envelope_w,
        interface_cap_gb_s=cal.stack.interface_cap_gb_s,
        page_bytes=cfg.page_bytes,
        blocks_per_subarray=cfg.blocks_per_subarray,
        wl_layers=cfg.wl_layers,
        pages_per_block=pages_per_block(cal.phys, cfg),
    )


def design_grid() -> list[NandSubarrayConfig]:
    """The published 60-point sweep grid, in a stable layer-major order."""
    return [
        NandSubarrayConfig(wl, page, blocks)
        for wl in GRID_WL_LAYERS
        for page in GRID_PAGE_BYTES
        for blocks in GRID_BLOCKS
    ]
