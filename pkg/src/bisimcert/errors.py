"""Exception types shared across the package."""


class BisimError(Exception):
    """Base class for all package-specific errors."""


class ParseError(BisimError):
    """Syntax or declaration error while parsing a DSL expression.

    Carries the character position of the offending token.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class EvalError(BisimError):
    """Math-domain error or missing binding during expression evaluation."""


class NonDifferentiableError(EvalError):
    """Gradient requested exactly at a non-differentiable point (abs at 0,
    min/max tie, sqrt at 0)."""


class DimensionError(BisimError):
    """Vector or subsystem dimensions do not match."""


class SmallGainError(BisimError):
    """The small-gain condition gamma1*gamma2/(lambda1*lambda2) < 1 fails,
    or the alpha case analysis is numerically inconsistent."""


class ModelError(BisimError):
    """Malformed or unresolvable model file content."""
