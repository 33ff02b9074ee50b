"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration and parameter problems
exit 1, I/O problems exit 2, numeric problems (resolution floors, fully
censored sweeps) exit 3.
"""


class PyrafoveError(Exception):
    """Base class for all package errors."""


class ParameterError(PyrafoveError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigError(PyrafoveError, ValueError):
    """A config file or config-derived object is invalid or inconsistent."""


class NyquistError(PyrafoveError, ValueError):
    """Requested resolution cannot represent a kernel's carrier wavelength.

    Carries the minimal admissible resolution so callers can report it.
    """

    def __init__(self, message: str, min_pixels_per_degree: float):
        super().__init__(message)
        self.min_pixels_per_degree = float(min_pixels_per_degree)


class BandLookupError(PyrafoveError, LookupError):
    """A scale does not match any band of the lattice."""


class OutOfRegionError(PyrafoveError, ValueError):
    """A (position, scale) pair lies outside the sampling region."""


class CensoredSweepError(PyrafoveError, RuntimeError):
    """Every point of a threshold sweep was censored; no fit is possible."""
