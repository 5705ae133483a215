"""Unit conventions, centralized so capacity/bandwidth math never drifts.

Bandwidth and marketed capacities use decimal GB (1e9 bytes); RAM-like
per-subarray capacities are quoted in binary MiB/GiB.  Time flows as
microseconds inside the models and milliseconds at reporting boundaries.
"""

GB = 1e9
TB = 1e12
MIB = 2**20
GIB = 2**30

US_PER_S = 1e6
MS_PER_S = 1e3

# W / (pJ/bit) -> GB/s comes out to exactly this factor:
# 1 W / 1 pJ/bit = 1e12 bit/s = 125e9 B/s = 125 GB/s.
GBPS_PER_W_PER_PJBIT = 125.0


def bytes_to_gb(n: float) -> float:
    return n / GB


def bytes_to_mib(n: float) -> float:
    return n / MIB


def us_to_ms(t: float) -> float:
    return t / 1e3


def bytes_per_us_from_gbps(bw_gb_s: float) -> float:
    """Decimal GB/s expressed as bytes per microsecond (1 GB/s == 1000 B/us)."""
    return bw_gb_s * 1e3
