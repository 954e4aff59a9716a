"""Exception types shared across the library."""


class FloquetLabError(Exception):
    """Base class for all library errors."""


class InvalidInputError(FloquetLabError, ValueError):
    """Non-finite or otherwise malformed numerical input."""


class DimensionError(FloquetLabError, ValueError):
    """Shapes of the operands do not chain."""


class DomainError(FloquetLabError, ValueError):
    """Input is outside the mathematical domain of the operation."""


class ConfigError(FloquetLabError, ValueError):
    """A configuration file or CLI argument failed validation."""


class NumericalError(FloquetLabError, RuntimeError):
    """An iterative procedure failed to converge."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class DivergenceError(NumericalError):
    """An integration produced a non-finite state."""

    def __init__(self, message: str, t_last: float):
        super().__init__(message)
        self.t_last = t_last


class TrainingDivergedError(NumericalError):
    """Training loss became non-finite."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch
