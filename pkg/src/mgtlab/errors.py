"""Exception types raised across the package.

Every error derives from :class:`MGTLabError` so callers can catch the whole
family; most also subclass ``ValueError`` because they signal bad input.
"""


class MGTLabError(Exception):
    """Base class for all package errors."""


# parameters, grids and data
class NonPositiveParameter(MGTLabError, ValueError):
    pass


class StabilityViolated(MGTLabError, ValueError):
    pass


class InvalidGrid(MGTLabError, ValueError):
    pass


class InsufficientDecay(MGTLabError, ValueError):
    pass


class ConfigError(MGTLabError, ValueError):
    pass


# characteristic roots
class DegenerateLeadingCoefficient(MGTLabError, ValueError):
    pass


class PolishDivergence(MGTLabError, ArithmeticError):
    pass


class BranchAmbiguity(MGTLabError, ValueError):
    pass


class OutOfZone(MGTLabError, ValueError):
    pass


# per-mode evolution
class DegenerateRoots(MGTLabError, ArithmeticError):
    pass


class StepTooLarge(MGTLabError, ValueError):
    pass


class UncalibratedConstants(MGTLabError, ValueError):
    pass


# norms and rates
class DivergentAtOrigin(MGTLabError, ValueError):
    pass


class ResolutionBudgetExceeded(MGTLabError, RuntimeError):
    pass


class InsufficientSamples(MGTLabError, ValueError):
    pass


class NonPositiveValues(MGTLabError, ValueError):
    pass


class UnsupportedDimension(MGTLabError, ValueError):
    pass


class TruncationWarning(UserWarning):
    """Raised as a warning when a spectral tail above the grid cut-off is not negligible."""


# energies and inviscid limit
class MissingAuxiliaries(MGTLabError, ValueError):
    pass


class StencilOutOfRange(MGTLabError, ValueError):
    pass


class WeightDivergence(MGTLabError, ValueError):
    pass


class QuadratureUnderResolved(MGTLabError, RuntimeError):
    pass


class WindowTooShort(MGTLabError, ValueError):
    pass


# nonlinear solver
class AliasingMaskMissing(MGTLabError, ValueError):
    pass


class NoContraction(MGTLabError, RuntimeError):
    pass


class StepRefinementFailed(MGTLabError, RuntimeError):
    pass


class MissingDerivatives(MGTLabError, ValueError):
    pass
