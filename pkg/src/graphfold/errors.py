"""Exception types raised across the package.

Every failure mode has a dedicated class so callers (and the CLI) can match
on type rather than parse messages.
"""


class GraphFoldError(Exception):
    """Base class for all package errors."""


# graph construction
class DuplicateEdge(GraphFoldError):
    pass


class SelfLoop(GraphFoldError):
    pass


class NonPositiveWeight(GraphFoldError):
    pass


class VertexOutOfRange(GraphFoldError):
    pass


class SizeZero(GraphFoldError):
    pass


class BadRange(GraphFoldError):
    pass


# spectral
class NotSymmetric(GraphFoldError):
    pass


class KOutOfRange(GraphFoldError):
    pass


class NoInvertibleSubset(GraphFoldError):
    pass


class SearchSpaceTooLarge(GraphFoldError):
    pass


# signals
class EmptyBounds(GraphFoldError):
    pass


class OutOfWindow(GraphFoldError):
    pass


# partition
class DimensionMismatch(GraphFoldError):
    pass


class Uncoverable(GraphFoldError):
    pass


class TooLargeForExact(GraphFoldError):
    pass


# recovery
class NoCandidate(GraphFoldError):
    pass


class AmbiguousRecovery(GraphFoldError):
    pass


class SingularWS(GraphFoldError):
    pass


class Infeasible(GraphFoldError):
    pass


class SolverDiverged(GraphFoldError):
    pass


class BoundaryViolated(GraphFoldError):
    pass


class EmptyCandidates(GraphFoldError):
    pass


class BadBracket(GraphFoldError):
    pass


# solver
class IterationLimit(GraphFoldError):
    pass


class NoFeasiblePoint(GraphFoldError):
    pass


# image IO
class MalformedHeader(GraphFoldError):
    pass


class TruncatedData(GraphFoldError):
    pass


# cli
class ConfigInvalid(GraphFoldError):
    pass
