"""Exception hierarchy shared by all modules."""


class LureconsError(Exception):
    """Base class for every error raised by this package."""


class InvalidEdge(LureconsError, ValueError):
    pass


class Disconnected(LureconsError):
    pass


class DimensionMismatch(LureconsError, ValueError):
    pass


class ChannelCountMismatch(DimensionMismatch):
    pass


class InvalidSector(LureconsError, ValueError):
    pass


class VariantMismatch(LureconsError, ValueError):
    pass


class NumericalFailure(LureconsError):
    pass


class Infeasible(LureconsError):
    pass


class SingularX(LureconsError):
    pass


class NoneFeasible(LureconsError):
    pass


class NonFiniteState(LureconsError):
    """Raised when a simulation diverges; ``trace`` holds the samples so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigError(LureconsError, ValueError):
    pass
