"""Exception hierarchy shared by every module."""


class OracleError(Exception):
    """Base class for all errors raised by this package."""


class GraphFormatError(OracleError, ValueError):
    """The edge-list document or edge set violates the graph invariants."""


class SingularSystemError(OracleError):
    """A fundamental-matrix system has no inverse.

    ``nodes`` lists the transient nodes that cannot leave the transient
    block (empty when singularity was only detected through a pivot).
    """

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class NumericalGuardError(OracleError):
    """An evaporation factor would underflow double precision."""

    def __init__(self, message, min_safe_alpha=None):
        super().__init__(message)
        self.min_safe_alpha = min_safe_alpha


class RoundingError(NumericalGuardError):
    """A raw avoidance cost lies outside the rounding guarantee window."""


class QueryError(OracleError, ValueError):
    """Malformed replacement-path query."""


class PersistenceError(OracleError):
    """Oracle file cannot be decoded."""


class ChecksumError(PersistenceError):
    pass


class VersionError(PersistenceError):
    pass


class TruncatedFileError(PersistenceError):
    pass
