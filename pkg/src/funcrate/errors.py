"""Exception types shared across the package."""


class FuncrateError(Exception):
    """Base class for all package-specific errors."""


class InfiniteMoment(FuncrateError):
    """The requested kernel moment diverges (heavy tails)."""


class HolderViolation(FuncrateError):
    """An empirical Holder ratio exceeded the declared norm."""


class NotNested(FuncrateError):
    """A coarse grid does not divide the fine grid."""


class NonFinite(FuncrateError):
    """A simulated path overflowed to inf/nan."""

    def __init__(self, message, master_seed=None, path_index=None):
        super().__init__(message)
        self.master_seed = master_seed
        self.path_index = path_index


class GammaTooLarge(FuncrateError):
    """The Holder exponent is outside the admissible range for the model."""


class UndefinedAtBoundary(FuncrateError):
    """The generic-branch constant is undefined at gamma = alpha/2."""


class DegenerateFit(FuncrateError):
    """Too few usable points to fit a convergence rate."""


class ConfigError(FuncrateError):
    """An experiment configuration could not be parsed or validated."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
