"""Exception hierarchy shared by all stripwave modules."""


class StripwaveError(Exception):
    """Base class for all stripwave failures."""


class ParameterError(StripwaveError, ValueError):
    """Invalid physical or numerical parameter (h <= 0, bad order, ...)."""


class ShapeError(StripwaveError, ValueError):
    """Mismatched or unsupported array shapes/grid sizes."""


class SymmetryError(StripwaveError):
    """Even-symmetry requirement violated beyond tolerance."""


class MeanError(StripwaveError):
    """Zero-mean (or fixed-mean) requirement violated beyond tolerance."""


class PositivityError(StripwaveError):
    """Surface elevation must stay strictly positive."""


class DegeneracyError(StripwaveError):
    """Conformal gradient or transversality matrix below the degeneracy floor."""


class IterationError(StripwaveError):
    """Newton (or refinement) iteration failed to converge."""

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class ConditioningError(StripwaveError):
    """Singular or numerically unusable linear system / eigenproblem."""


class ConfigError(StripwaveError, ValueError):
    """Invalid run configuration (unknown key, bad value, missing input)."""
