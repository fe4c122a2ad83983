"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes (parse -> 2, domain -> 3, blow-up -> 4),
so library code should raise the most specific class that applies.
"""


class DomainError(ValueError):
    """An argument violates a documented precondition."""


class ParseError(ValueError):
    """An input file or literal could not be parsed."""


class MeshError(DomainError):
    """No admissible mesh exists (an indivisible step exceeds the budget)."""


class BisectionError(DomainError):
    """A control could not be split into balanced halves."""

    def __init__(self, msg: str, imbalance: float):
        super().__init__(msg)
        self.imbalance = imbalance


class BlowUpError(RuntimeError):
    """A numerical integration produced non-finite state."""
