"""Exception types shared across the package."""


class EnergyCausalityError(RuntimeError):
    """An update was attempted with an empty battery."""


class DomainError(ValueError):
    """A closed-form expression was evaluated outside its domain."""


class BracketError(ArithmeticError):
    """Bisection endpoints do not straddle a sign change."""


class IncompatiblePolicyError(ValueError):
    """The policy cannot run on the requested battery capacity."""
