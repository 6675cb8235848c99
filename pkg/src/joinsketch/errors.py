"""Exception hierarchy shared across the package."""


class JoinSketchError(Exception):
    """Base class for all joinsketch errors."""


class QueryError(JoinSketchError):
    """The query document is malformed or names unknown columns."""


class UnsupportedQueryError(QueryError):
    """The query is structurally valid but outside the supported class
    (cyclic join graph, disconnected relations)."""


class DataError(JoinSketchError):
    """A data source is missing, truncated, or contains unparsable values."""


class BudgetError(JoinSketchError):
    """An exact or naive evaluation would exceed its cost guard."""
