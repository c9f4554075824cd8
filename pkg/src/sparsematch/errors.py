"""Exception hierarchy shared by every stage of the pipeline.

Each class carries the process exit code the command line front end uses
when the error escapes a subcommand.
"""


class SparseMatchError(Exception):
    exit_code = 1


class ConfigError(SparseMatchError, ValueError):
    """Invalid parameters or inconsistent configuration."""

    exit_code = 2


class DataError(SparseMatchError):
    """Unreadable, malformed or out-of-range input data."""

    exit_code = 3


class FormatError(DataError):
    """A file does not have the expected layout, magic or version."""


class CorruptionError(FormatError):
    """A container failed its checksum or ended early."""


class ShapeError(SparseMatchError, ValueError):
    """Array shapes that do not chain, e.g. a model fed the wrong width."""

    exit_code = 2


class NumericError(SparseMatchError, ArithmeticError):
    """A linear-algebra step failed or missed its accuracy contract."""

    exit_code = 4


class GraphError(NumericError):
    """The affinity graph cannot support the requested computation."""


class TrainingError(SparseMatchError):
    exit_code = 3


class EvaluationError(SparseMatchError):
    exit_code = 3
