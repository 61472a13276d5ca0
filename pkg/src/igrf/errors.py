"""Exception hierarchy shared by all stages.

The CLI maps these onto exit codes (config 2, data 3, numeric 4).
"""


class IgrfError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(IgrfError):
    """Invalid or incomplete pipeline configuration."""


class SchemaError(IgrfError):
    """Column layout of a file or table does not match the declared schema."""


class DataError(IgrfError):
    """Malformed rows, unknown classes, empty inputs and similar data faults."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class NumericError(IgrfError):
    """Non-finite loss or other numerical breakdown during training."""

    def __init__(self, message, seed=None):
        if seed is not None:
            message = f"{message} (seed={seed})"
        super().__init__(message)
        self.seed = seed


class EvaluatorError(IgrfError):
    """An RFE evaluator failed on a particular subset/seed."""

    def __init__(self, message, seed=None, subset=None):
        super().__init__(f"{message} (seed={seed})")
        self.seed = seed
        self.subset = subset
