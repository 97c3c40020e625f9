"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
NumericError -> 3, I/O problems (OSError) -> 4.
"""


class ShapeError(ValueError):
    """Operands have incompatible shapes; message names both."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class NumericError(ArithmeticError):
    """Non-finite values or numerically invalid input."""


class ConfigError(ValueError):
    """Invalid or unknown configuration."""


class SamplingError(RuntimeError):
    """A dataset cannot support the requested sampling."""
