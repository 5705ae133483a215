"""Calibration files for the device and system models.

Every model coefficient lives in a YAML file under this package so a fit can
be swapped without touching code.  Set ``FLASHANN_CALIBRATION_DIR`` to a
directory to override individual files; anything not found there falls back
to the packaged defaults.  Loading is strict — unknown keys are an error, so
a typo cannot silently leave a coefficient at its default.
"""

from __future__ import annotations

import hashlib
import os
from importlib import resources
from pathlib import Path

import yaml

from ..errors import ModelConfigError

ENV_DIR = "FLASHANN_CALIBRATION_DIR"

_NAMES = (
    "nand.yaml",
    "gpu.yaml",
    "backend_dram.yaml",
    "backend_ssd.yaml",
    "backend_hbf.yaml",
    "dse.yaml",
)


def _packaged(name: str) -> bytes:
    return resources.files(__package__).joinpath(name).read_bytes()


def read_calibration_bytes(name: str) -> bytes:
    if name not in _NAMES:
        raise ModelConfigError(f"unknown calibration file {name!r}")
    override = os.environ.get(ENV_DIR)
    if override:
        path = Path(override) / name
        if path.exists():
            return path.read_bytes()
    return _packaged(name)


def load_calibration(name: str) -> dict:
    raw = read_calibration_bytes(name)
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ModelConfigError(f"{name}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelConfigError(f"{name}: top level must be a mapping")
    return data


def calibration_digest(name: str) -> str:
    """sha256 of the bytes actually in effect (override or packaged)."""
    return hashlib.sha256(read_calibration_bytes(name)).hexdigest()


def all_digests() -> dict[str, str]:
    return {name: calibration_digest(name) for name in _NAMES}


def _require(data: dict, keys: set[str], name: str) -> None:
    got = set(data)
    missing = keys - got
    extra = got - keys
    if missing:
        raise ModelConfigError(f"{name}: missing keys {sorted(missing)}")
    if extra:
        raise ModelConfigError(f"{name}: unknown keys {sorted(extra)}")


def load_nand_calibration():
    from ..nand import (
        AreaParams,
        EnergyCoeffs,
        LatencyCoeffs,
        NandCalibration,
        NandPhysicalParams,
        StackParams,
    )

    data = load_calibration("nand.yaml")
    _require(data, {"physical", "energy", "latency", "area", "stack"}, "nand.yaml")
    try:
        phys = NandPhysicalParams(**data["physical"])
        energy = EnergyCoeffs(**data["energy"])
        latency = LatencyCoeffs(**data["latency"])
        area = AreaParams(**data["area"])
        stack = StackParams(**data["stack"])
    except TypeError as exc:
        raise ModelConfigError(f"nand.yaml: {exc}") from exc
    return NandCalibration(phys=phys, energy=energy, latency=latency, area=area, stack=stack)
