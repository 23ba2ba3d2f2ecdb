"""Exception hierarchy shared across the package.

CLI exit codes map onto this: DataError -> 1, BackendError -> 2.
"""


class KateError(Exception):
    """Base class for all errors raised by this package."""


class DataError(KateError):
    """Invalid input data: malformed files, broken invariants, bad config."""


class UnpromptableError(DataError):
    """The test source alone does not fit inside the token budget."""


class BackendError(KateError):
    """A completion backend failed to produce text for a prompt."""
