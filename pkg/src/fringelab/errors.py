"""Exception types shared across the package."""


class FringelabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FringelabError):
    """Invalid configuration, manifest, or data file."""


class QuadratureError(FringelabError):
    """Velocity-average quadrature failed to reach the requested tolerance.

    The achieved absolute-error estimate is stored in ``achieved``.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class FitError(FringelabError):
    """Nonlinear least-squares fit did not converge.

    Solver diagnostics (status, gradient norm, evaluation count) are stored
    in ``diagnostics``.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateFringeError(FitError):
    """Fitted visibility is consistent with zero; the phase is unidentifiable."""


class AnalysisError(FringelabError):
    """Campaign-level analysis failed (bad off/on/off pattern, unidentifiable model, ...)."""
