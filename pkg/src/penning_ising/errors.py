"""Exception hierarchy; the CLI maps each family to an exit code."""


class PenningIsingError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PenningIsingError, ValueError):
    """Invalid parameters or configuration."""


class PhysicsDomainError(PenningIsingError):
    """Inputs are valid but the requested physics does not exist there."""


class ResonanceError(PhysicsDomainError):
    """Drive frequency falls on (or too close to) a normal mode."""


class InstabilityError(PhysicsDomainError):
    """Trap or crystal is mechanically unstable."""


class ConvergenceError(PhysicsDomainError):
    """An iterative solver ran out of budget."""


class InvariantViolation(PenningIsingError, AssertionError):
    """A numerical invariant (normalization, hermiticity, ...) failed."""
