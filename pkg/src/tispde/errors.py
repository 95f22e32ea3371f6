class TispdeError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(TispdeError, ValueError):
    pass


class UnsupportedOrderError(TispdeError, ValueError):
    pass


class ProjectionError(TispdeError, ValueError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class UnsupportedMeasureError(TispdeError, ValueError):
    pass


class NumericalBlowupError(TispdeError, ArithmeticError):
    """A scheme produced a non-finite state (distinct from threshold stopping)."""

    def __init__(self, message, state=None, time=None):
        super().__init__(message)
        self.state = state
        self.time = time


class ConfigError(TispdeError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
