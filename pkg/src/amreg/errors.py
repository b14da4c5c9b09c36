"""Typed error taxonomy shared by the whole package.

Every failure mode the library reports deliberately gets its own class so
callers (and the CLI exit-code mapping) can branch on type instead of
parsing messages.  Plain OSError is used for filesystem-level I/O failures.
"""


class RegistrationError(Exception):
    """Base class for all errors raised by this package."""


# --- raster / PGM errors -------------------------------------------------

class BadMagic(RegistrationError):
    """File does not start with the binary PGM magic 'P5'."""


class UnsupportedMaxval(RegistrationError):
    """PGM maxval is not 255."""


class TruncatedData(RegistrationError):
    """PGM header ended prematurely or payload is shorter than width*height."""


class TooSmall(RegistrationError):
    """Image or template is smaller than the operation requires."""


class OutOfBounds(RegistrationError):
    """Crop or window exceeds the image bounds."""


class DimensionMismatch(RegistrationError):
    """Two rasters that must share dimensions do not."""


# --- metric / search errors ----------------------------------------------

class ZeroVariance(RegistrationError):
    """An image (or sub-image) is constant where the metric needs spread."""


class NoValidOffset(RegistrationError):
    """Every candidate placement in a search window was skipped."""


# --- solver errors --------------------------------------------------------

class DegenerateSystem(RegistrationError):
    """The stationarity system cannot be reduced (e.g. Q(y) identically zero)."""


class ZeroPolynomial(RegistrationError):
    """All polynomial coefficients vanish; roots are undefined."""


# --- sequence errors -------------------------------------------------------

class TrackMismatch(RegistrationError):
    """Track length or frame indices do not match the frame list."""


class TooFewFrames(RegistrationError):
    """Operation needs at least two frames / samples."""


class LengthMismatch(RegistrationError):
    """Paired sequences have different lengths."""
