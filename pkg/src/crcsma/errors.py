"""Exception hierarchy shared by the analytic and simulation layers."""


class ValidationError(ValueError):
    """A parameter failed its range or type check."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a function."""


class UnsupportedConfigurationError(ValueError):
    pass


class NumericalInstabilityError(ArithmeticError):
    pass


class SolverError(RuntimeError):
    """The stationary solver failed; ``residual`` holds the last residual."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class NonErgodicError(SolverError):
    """The chain has more than one closed communicating class."""


class FixedPointError(RuntimeError):
    def __init__(self, message, last_iterates=()):
        super().__init__(message)
        self.last_iterates = tuple(last_iterates)


class UndefinedEstimateError(ValueError):
    """An empirical estimate has an empty denominator."""


class ContractError(ValueError):
    """Two objects that must describe the same configuration do not."""
