"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """An input violates a documented precondition (grid, bracket, state)."""


class NumericError(ArithmeticError):
    """An iterative procedure failed to converge."""
