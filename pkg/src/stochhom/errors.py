"""Exception types raised across the package."""


class ParameterError(ValueError):
    """Invalid model or discretisation parameters."""


class InputError(ValueError):
    """Inputs violate an operation's preconditions (e.g. incompatible RHS)."""


class NumericalError(ArithmeticError):
    """Numerical breakdown inside an iterative method."""
