"""Exception and warning types shared across the solver."""

from __future__ import annotations


class RegimeStopError(Exception):
    """Base class for all solver errors."""


class ModelValidationError(RegimeStopError):
    """Raised when a market model violates its invariants.

    Carries the full list of violations, not just the first one found.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class NonPositiveSigma(RegimeStopError):
    def __init__(self, state: int, value: float):
        self.state = state
        self.value = value
        super().__init__(f"sigma[{state}] = {value} must be > 0")


class BadGeneratorRow(RegimeStopError):
    def __init__(self, row: int, residual: float):
        self.row = row
        self.residual = residual
        super().__init__(f"generator row {row} sums to {residual:+.3e}, expected 0")


class NegativeOffDiagonal(RegimeStopError):
    def __init__(self, row: int, col: int, value: float):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"generator[{row},{col}] = {value} must be >= 0")


class NonPositiveTime(RegimeStopError):
    """Time argument of a density or rule must be strictly positive."""


class InterpolationOutOfRange(RegimeStopError):
    """A surface was queried below the ratio floor a = 1.

    The kernel state update cannot produce such points, so this signals an
    internal bug rather than bad user input.
    """


class DominanceViolation(RegimeStopError):
    """Value exceeded the stop-value beyond tolerance; signals a solver bug."""


class EmptyStopSet(RegimeStopError):
    """No grid node was classified STOP at some (time, state).

    Usually means the ratio grid is truncated too low; raise a_max.
    """


class ConfigError(RegimeStopError):
    """Configuration file could not be parsed or failed validation."""


class NonMonotoneSetWarning(UserWarning):
    """Continuation pockets found above the first stopping node.

    The stopping region is an up-set in theory, so pockets indicate numerical
    noise near the boundary; the warning carries their locations so tolerances
    can be retuned.
    """

    def __init__(self, message, pockets):
        super().__init__(message)
        self.pockets = pockets
