"""Exception types raised across the package."""


class DirescuError(Exception):
    """Base class for package errors."""


class DomainError(DirescuError, ValueError):
    """An input lies outside the region where a formula is defined."""


class InfeasibleControlError(DirescuError, ValueError):
    """Controls violate bounds or produce a non-positive quantity."""


class SingularSystemError(DirescuError, ArithmeticError):
    """A linear system that should be solved is (numerically) singular."""


class ApproximationError(DirescuError, ValueError):
    """Node set or fitted values cannot support the requested fit."""


class SolverError(DirescuError, RuntimeError):
    """A backward induction or node solve failed beyond tolerance."""


class ConfigError(DirescuError, ValueError):
    """Malformed or inconsistent scenario configuration."""
