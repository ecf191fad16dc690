"""Exception types shared across the package."""


class HeightLabError(Exception):
    """Base class for package errors."""


class EmptyInterior(HeightLabError):
    """Domain discretization produced no interior sites."""


class NotIntegrable(HeightLabError):
    """Gradient field has a nonzero plaquette or winding defect."""


class SplitFailed(HeightLabError):
    """Potential decomposition failed its certification."""


class StepTooLarge(HeightLabError):
    """Langevin step exceeds the stability cap."""


class NonFinite(HeightLabError):
    """A field value became NaN or infinite."""


class TimeMismatch(HeightLabError):
    """System clock does not match the requested macroscopic time."""


class CflViolation(HeightLabError):
    """Explicit PDE step exceeds the CFL bound."""


class FluxRangeExceeded(HeightLabError):
    """Too many flux queries fell outside the tabulated gradient range."""


class ConfigError(HeightLabError):
    """Invalid, missing, or unknown configuration keys."""
