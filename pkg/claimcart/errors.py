"""
Exception types for claimcart

Every user-facing failure derives from ClaimCartError so the command line
can report it as a single machine-parsable line.
"""

from typing import Optional


class ClaimCartError(Exception):
    """Base class for all claimcart errors"""


class SchemaError(ClaimCartError):
    """A covariate schema declaration is inconsistent"""


class RoutingError(ClaimCartError):
    """An observation cannot be routed through a tree"""

    def __init__(self, variable: str, level: str):
        super().__init__(f"unknown level {level!r} for categorical variable {variable!r}")
        self.variable = variable
        self.level = level


class IngestionError(ClaimCartError):
    """
    A data file violates the dataset contract.

    Args:
        message: What went wrong
        row: 1-based data row (header excluded), when the problem is row-specific
        column: Offending column name
    """

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column!r}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


class EstimationError(ClaimCartError):
    """A moment estimator is undefined for the given node"""


class SelectionError(ClaimCartError):
    """Model selection cannot proceed"""


class MetricError(ClaimCartError):
    """A metric is undefined for the given tree and test data"""


class ConfigError(ClaimCartError):
    """A run configuration is invalid"""


class EditRejected(Exception):
    """
    A structural edit would leave a node below the minimum size.

    This is a control-flow signal for the proposal layer, not a failure.
    """
