"""Exception hierarchy shared by every module of the package."""


class AoIError(Exception):
    """Base class for all errors raised by aoiprio."""


class InvalidConfig(AoIError, ValueError):
    """Rates, stream counts or simulation settings outside their domain."""


class InvalidModel(AoIError, ValueError):
    """A malformed SHS description (bad indices, shapes, rates or drifts)."""


class SingularChain(AoIError):
    """The balance equations of the discrete chain have no unique solution."""


class SingularSystem(AoIError):
    """The stacked correlation-vector system has no unique solution."""


class BracketError(AoIError):
    """A search bracket does not enclose an interior minimum."""


class NoSignChange(AoIError):
    """A root bracket does not straddle a crossing."""


class MultipleCrossings(AoIError):
    """A root bracket holds more than one crossing."""
