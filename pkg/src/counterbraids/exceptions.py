"""Exception types raised across the package."""


class CounterBraidError(Exception):
    """Base class for all package errors."""


class DomainError(CounterBraidError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalError(CounterBraidError, ArithmeticError):
    """A numerical routine failed to reach its requested accuracy."""


class ConsistencyError(CounterBraidError, RuntimeError):
    """Internal state violated an invariant (corrupted input or a bug)."""


class CapacityError(CounterBraidError):
    """A counter in the last layer overflowed; the braid cannot be decoded."""


class BracketError(CounterBraidError, ValueError):
    """A root or threshold search could not bracket its target."""
