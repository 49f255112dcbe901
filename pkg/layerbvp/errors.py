"""
Exception hierarchy for layerbvp

Every failure the library signals derives from LayerBVPError so callers
(the CLI in particular) can map them onto exit codes in one place.
"""

from typing import Any, Optional, Sequence


class LayerBVPError(Exception):
    """Base class for all layerbvp errors"""


class DomainError(LayerBVPError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class ConfigurationError(LayerBVPError, ValueError):
    """Invalid configuration, flag or environment value"""


class InvalidBranchError(LayerBVPError, ValueError):
    """Operation requested for a branch it is not defined on"""


class NumericalError(LayerBVPError):
    """A numerical procedure failed; carries the last finite state when known"""

    def __init__(self, message: str, last_state: Optional[Sequence[Any]] = None,
                 last_time: Any = None):
        super().__init__(message)
        self.last_state = tuple(last_state) if last_state is not None else None
        self.last_time = last_time


class NonConvergenceError(NumericalError):
    """Step, iteration or refinement budget exhausted"""


class BlowUpError(NumericalError):
    """State escaped the representable range"""


class NoCrossingError(NumericalError):
    """A trajectory never reaches the requested level"""


class QuadratureError(NumericalError):
    """Quadrature did not reach the requested accuracy"""


class BracketError(NumericalError):
    """No sign change on the bracket handed to a root finder"""


class BranchNotFoundError(LayerBVPError):
    """The requested solution branch does not exist at this epsilon"""


class FitError(NumericalError):
    """Least-squares fit is ill-conditioned or underdetermined"""
