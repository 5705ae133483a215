"""flashann: IVF-PQ vector search plus timing/energy models for where the
rerank traffic lands — an on-package flash stack with a near-storage search
unit, host DRAM over PCIe, or an NVMe SSD."""

__version__ = "0.1.0"

from .errors import AddressError, FormatError, ModelConfigError

__all__ = ["AddressError", "FormatError", "ModelConfigError", "__version__"]
