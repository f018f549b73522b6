"""Exception types shared across the package."""


class HierFdrError(ValueError):
    """Base class for user-facing input and validation errors."""


class TreeFormatError(HierFdrError):
    """A hypothesis document could not be parsed or violates the tree invariants.

    ``path`` names the offending node (materialized id path) or input line.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class RecordError(HierFdrError):
    """A replication record row is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InvariantError(RuntimeError):
    """An internal consistency check failed (a bug, not bad input)."""
