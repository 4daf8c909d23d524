"""Exception hierarchy shared by all modules."""


class CohExtractError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimensionError(CohExtractError, ValueError):
    """A matrix or ladder dimension is incompatible with the requested operation."""


class InvalidArgumentError(CohExtractError, ValueError):
    """An argument is outside its allowed domain (non-unitary U, bad protocol, ...)."""


class InvalidStateError(CohExtractError, ValueError):
    """A matrix fails the density-operator invariants."""


class TruncationError(CohExtractError):
    """Truncating the ladder would discard more probability than allowed.

    ``required`` carries the smallest truncation that satisfies the tolerance,
    when it is known.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class RepetitionLimitError(CohExtractError):
    """More extraction rounds were requested than the reservoir supports."""


class DivergenceError(CohExtractError, ValueError):
    """A series was evaluated outside its radius of convergence."""


class ConsistencyError(CohExtractError):
    """Two independent evaluation routes disagree beyond tolerance."""
