"""
Exception types raised by the NV kinetics toolkit.
"""


class NVKineticsError(Exception):
    """Base class for toolkit errors."""


class ConfigError(NVKineticsError, ValueError):
    """Run configuration could not be parsed or is out of bounds."""


class NonHermitianError(NVKineticsError, ValueError):
    """A matrix expected to be Hermitian is not."""


class StepSizeError(NVKineticsError, ValueError):
    """Integration step too coarse for the fastest rate."""


class SingularSystemError(NVKineticsError, ArithmeticError):
    """The steady-state rate system could not be solved."""


class SpectrumFormatError(NVKineticsError, ValueError):
    """Spectrum data is malformed or of the wrong kind."""


class BaselineError(NVKineticsError, ValueError):
    """Too few off-peak samples to support a baseline fit."""
