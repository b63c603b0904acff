"""Exception hierarchy shared across the toolkit.

Each error class carries the process exit code used by the CLI.
"""


class SplitVoteError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class DataError(SplitVoteError):
    """Malformed, non-finite, or dimensionally inconsistent data."""

    exit_code = 2


class TrainingError(DataError):
    """A submodel could not be trained (e.g. it received no rows)."""


class InvalidConfigurationError(SplitVoteError):
    """Structurally impossible configuration (e.g. more submodels than features)."""

    exit_code = 3


class CapacityError(SplitVoteError):
    """Request exceeds the configured exhaustive-search caps."""

    exit_code = 4


class InvalidArgumentError(SplitVoteError, ValueError):
    """Arguments violate an operation's precondition (e.g. comparing a label to itself)."""


class InvalidUpgradeError(SplitVoteError):
    """Certificate guarantee upgrade requested for an ensemble mode that does not support it."""
