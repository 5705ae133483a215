"""Exception taxonomy shared across the package.

CLI exit-code mapping: ValueError (and subclasses) -> 1 (usage), FormatError
and OSError -> 2 (data/format), ModelConfigError -> 3 (model/config).
"""


class FormatError(Exception):
    """A data file (fvecs/bvecs/ivecs, index, report) failed to parse."""


class ModelConfigError(Exception):
    """A calibration/config file is missing, malformed, or has unknown keys."""


class AddressError(ValueError):
    """A vector id does not fit the physical layout it was mapped against."""
