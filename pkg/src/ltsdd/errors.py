"""Exception types raised by the solver library."""


class LtsddError(Exception):
    """Base class for all library errors."""


class InvalidGrid(LtsddError, ValueError):
    pass


class MisalignedPartition(LtsddError, ValueError):
    pass


class InvalidPartition(LtsddError, ValueError):
    pass


class GridMismatch(LtsddError, ValueError):
    pass


class SingularMatrix(LtsddError, ArithmeticError):
    pass


class DegenerateElement(LtsddError, ValueError):
    pass


class InvalidRobinParameter(LtsddError, ValueError):
    pass


class ConfigError(LtsddError, ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class WindowFailure(LtsddError, RuntimeError):
    def __init__(self, window, message):
        self.window = window
        super().__init__(f"time window {window}: {message}")
