"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError (and subclasses) -> 3, DivergenceError -> 4.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError):
    """Invalid configuration value, flag, or unknown config key."""


class DataError(ToolkitError):
    """Malformed, inconsistent, or missing input data."""


class ShapeError(DataError):
    """Array dimensions do not match the declared contract."""


class FormatError(DataError):
    """Binary file violates its wire format.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DegenerateInputError(DataError):
    """Input vector is unusable (e.g. zero norm where a direction is needed)."""


class ContractError(DataError):
    """Caller violated an API precondition (e.g. rows not unit-normalized)."""


class ArchitectureError(DataError):
    """Malformed layer spec or a layer producing a non-positive dimension."""


class DivergenceError(ToolkitError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, step: int | None = None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step
