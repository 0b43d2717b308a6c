"""Exception types shared across the package."""


class SteerkitError(Exception):
    """Base class for all package errors."""


class DimensionError(SteerkitError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(SteerkitError, ValueError):
    """A documented precondition of an operation was violated."""


class ParseError(SteerkitError, ValueError):
    """Malformed input file (PPM image, index CSV, config, checkpoint)."""


class ConfigError(SteerkitError, ValueError):
    """Invalid or unknown run-configuration key/value."""


class NumericsError(SteerkitError, RuntimeError):
    """Non-finite value encountered where finiteness is required (NaN loss abort)."""


class CheckpointError(SteerkitError, ValueError):
    """Checkpoint file is malformed or does not match the model config."""
