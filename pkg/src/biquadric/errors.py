"""Exception types shared across the toolkit.

The CLI maps these onto exit codes, so library code should raise them
instead of bare ``ValueError``/``RuntimeError`` whenever the distinction
matters to a caller.
"""


class PreconditionError(ValueError):
    """An input violates the documented domain of an operation."""


class BudgetExceeded(RuntimeError):
    """A computation would exceed its time, memory or size budget.

    ``feasible`` optionally carries the largest parameter value that the
    caller could have requested within budget.
    """

    def __init__(self, message, feasible=None):
        super().__init__(message)
        self.feasible = feasible


class ToleranceUnreachable(BudgetExceeded):
    """A requested accuracy cannot be certified within the allowed budget."""
