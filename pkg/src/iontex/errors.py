"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes (see cli.py), so library code
should raise the most specific class that applies.
"""


class IontexError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(IontexError, ValueError):
    """A parameter or configuration value violates its contract."""


class ConfigError(InvalidParameterError):
    """Experiment config file is malformed; message names the failing key."""


class NumericalError(IontexError, RuntimeError):
    """An integrator or convergence check failed to meet its tolerance."""


class FitError(IontexError, RuntimeError):
    """A nonlinear fit failed to converge or the data are unidentifiable."""


class NoUniquePhaseError(FitError):
    """Azimuthally symmetric data admit no unique phase offset."""


class IncompleteDataError(IontexError, ValueError):
    """A required measurement basis or record is missing."""


class DegenerateSpinError(IontexError, ValueError):
    """A zero-length Bloch vector cannot be renormalized onto the sphere."""


class TriangulationError(IontexError, RuntimeError):
    """The ion positions do not admit a 2D Delaunay triangulation."""


class ParseError(IontexError, ValueError):
    """An input file could not be parsed; message carries the record index."""
