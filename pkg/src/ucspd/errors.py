"""Exception hierarchy shared by the whole package.

Two failure families matter to callers: bad inputs (wrong grids, out-of-range
parameters, malformed scenario files) and numerical failures that show up only
at run time (fits that do not converge, waveforms whose half-maximum width is
undefined).  The command line maps the first family to exit code 1 and the
second to exit code 2.
"""

from __future__ import annotations


class UcspdError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(UcspdError, ValueError):
    """An input, parameter, or configuration violates a documented contract."""


class GridMismatchError(ValidationError):
    """Two sampled waveforms do not share a compatible time grid."""


class ScenarioError(ValidationError):
    """A scenario document is malformed, incomplete, or contains unknown keys."""


class NumericalError(UcspdError, RuntimeError):
    """A computation failed for numerical reasons rather than bad input."""


class FitConvergenceError(NumericalError):
    """A model fit did not converge or produced a non-significant result."""
