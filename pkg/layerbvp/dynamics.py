"""
Phase-plane dynamics of eps*y'' = y*y' - y

With z = y' the problem becomes the planar system

    y' = z
    z' = y (z - 1) / eps

which conserves C^2 = y^2 - 2 eps [z + log(1 - z)] below the invariant line
z = 1. In canonical coordinates Q = y, P = log(1 - z) the same flow is the
Hamiltonian system Q' = 1 - e^P, P' = Q/eps with H = P - e^P - Q^2/(2 eps).

The canonical form is what the integrator uses for z < 1: the slow strip
next to z = 1 becomes P -> -infinity, so gaps 1 - z of 1e-30 and below are
stored without cancellation.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Optional, Tuple

from .errors import DomainError
from .hpreal import MACHINE, Kernel
from .special import WBranch, lambert_w

logger = logging.getLogger(__name__)

# Published critical parameter of the pitchfork; locate_critical recomputes it.
CRITICAL_EPSILON = 0.2159869288903
CRITICAL_Z = -3.9052637703

State = Tuple[Any, ...]


@dataclass(frozen=True)
class Params:
    """Perturbation parameter eps > 0"""

    epsilon: float

    def __post_init__(self):
        try:
            positive = self.epsilon > 0
        except TypeError:
            raise DomainError(f"epsilon must be a real number, got {self.epsilon!r}")
        if not positive:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")

    def eps(self, kernel: Kernel = MACHINE) -> Any:
        """
        epsilon as a scalar of the given kernel

        Extended kernels read a float epsilon through its shortest decimal
        form, so Params(0.1) is the decimal 0.1 at any precision.
        """
        if kernel.extended and isinstance(self.epsilon, float):
            return _decimal_eps(self.epsilon, kernel)
        return kernel.mpf(self.epsilon)


@lru_cache(maxsize=256)
def _decimal_eps(epsilon: float, kernel: Kernel) -> Any:
    return kernel.mpf(repr(epsilon))


@dataclass(frozen=True)
class PhasePoint:
    """A state (y, z) with z = y'"""

    y: Any
    z: Any

    def as_tuple(self) -> Tuple[Any, Any]:
        return (self.y, self.z)


@dataclass(frozen=True)
class ConservedLabel:
    """The trajectory label C^2 (kept squared: y changes sign along loops)"""

    c_squared: Any


def slope_invariant(z: Any, kernel: Kernel = MACHINE) -> Any:
    """f(z) = z + log(1 - z), equal at the two ends of any y=1 -> y=-1 arc"""
    if not z < 1:
        raise DomainError(f"slope invariant requires z < 1, got {z}")
    return z + kernel.log(1 - z)


def slope_invariant_from_gap(gap: Any, kernel: Kernel = MACHINE) -> Any:
    """f written in terms of u = 1 - z (exact for u far below machine epsilon)"""
    if not gap > 0:
        raise DomainError(f"gap 1 - z must be positive, got {gap}")
    return 1 - gap + kernel.log(gap)


def rhs(p: PhasePoint, params: Params, kernel: Kernel = MACHINE) -> PhasePoint:
    """Velocity (y', z') = (z, y(z - 1)/eps)"""
    eps = params.eps(kernel)
    return PhasePoint(p.z, p.y * (p.z - 1) / eps)


def conserved(p: PhasePoint, params: Params, kernel: Kernel = MACHINE) -> ConservedLabel:
    """C^2 = y^2 - 2 eps [z + log(1 - z)]"""
    if not p.z < 1:
        raise DomainError(f"conserved quantity requires z < 1, got z={p.z}")
    eps = params.eps(kernel)
    return ConservedLabel(p.y * p.y - 2 * eps * slope_invariant(p.z, kernel))


def conserved_canonical(q: Any, p_log: Any, params: Params,
                        kernel: Kernel = MACHINE) -> ConservedLabel:
    """C^2 from canonical coordinates, no cancellation near z = 1"""
    eps = params.eps(kernel)
    return ConservedLabel(q * q - 2 * eps * (1 - kernel.exp(p_log) + p_log))


def z_of_y(y: Any, label: ConservedLabel, params: Params,
           branch: WBranch = WBranch.PRINCIPAL, kernel: Kernel = MACHINE) -> Optional[Any]:
    """
    Slope where the trajectory labelled C^2 crosses the vertical line at y

    z = 1 + W(-exp(-1 + (y^2 - C^2)/(2 eps))). The principal branch gives
    the crossing with 0 <= z < 1, the lower branch the one with z <= 0.
    Returns None when the trajectory does not reach that y.
    """
    w = _w_of_crossing(y, label, params, branch, kernel)
    if w is None:
        return None
    return 1 + w


def gap_of_y(y: Any, label: ConservedLabel, params: Params,
             branch: WBranch = WBranch.PRINCIPAL, kernel: Kernel = MACHINE) -> Optional[Any]:
    """1 - z at the crossing, i.e. -W(...), without forming 1 + W"""
    w = _w_of_crossing(y, label, params, branch, kernel)
    if w is None:
        return None
    return -w


def _w_of_crossing(y, label, params, branch, kernel):
    eps = params.eps(kernel)
    exponent = (y * y - label.c_squared) / (2 * eps)
    if exponent > 0:
        logger.debug("z_of_y: y=%s lies outside the loop C^2=%s", y, label.c_squared)
        return None
    argument = -kernel.exp(exponent - 1)
    if branch is WBranch.LOWER and argument == 0:
        return None
    try:
        return lambert_w(argument, branch, kernel)
    except DomainError:
        return None


def symmetry_map(p: PhasePoint) -> PhasePoint:
    """Reflection (y, z) -> (-y, z); with time reversal it maps the flow to itself"""
    return PhasePoint(-p.y, p.z)


def curve_symmetry(x: Any, y: Any) -> Tuple[Any, Any]:
    """(x, y) -> (1 - x, -y), which maps solutions of the BVP to solutions"""
    return (1 - x, -y)


def to_canonical(p: PhasePoint, kernel: Kernel = MACHINE) -> Tuple[Any, Any]:
    """(Q, P) = (y, log(1 - z))"""
    if not p.z < 1:
        raise DomainError(f"canonical coordinates require z < 1, got z={p.z}")
    return (p.y, kernel.log(1 - p.z))


def from_canonical(q: Any, p_log: Any, kernel: Kernel = MACHINE) -> PhasePoint:
    return PhasePoint(q, 1 - kernel.exp(p_log))


def hamiltonian(p: PhasePoint, params: Params, kernel: Kernel = MACHINE) -> Any:
    """H = P - e^P - Q^2/(2 eps), equal to -1 - C^2/(2 eps)"""
    q, p_log = to_canonical(p, kernel)
    eps = params.eps(kernel)
    return p_log - kernel.exp(p_log) - q * q / (2 * eps)


def canonical_rhs(q: Any, p_log: Any, params: Params,
                  kernel: Kernel = MACHINE) -> Tuple[Any, Any]:
    """(Q', P') = (1 - e^P, Q/eps)"""
    eps = params.eps(kernel)
    return (1 - kernel.exp(p_log), q / eps)


def cartesian_field(params: Params, kernel: Kernel = MACHINE) -> Callable[[State], State]:
    """Vector field on (y, z) tuples for the integrator"""
    inv_eps = 1 / params.eps(kernel)

    def field(state: State) -> State:
        y, z = state
        return (z, y * (z - 1) * inv_eps)

    return field


def canonical_field(params: Params, kernel: Kernel = MACHINE) -> Callable[[State], State]:
    """Vector field on (Q, P) tuples for the integrator"""
    inv_eps = 1 / params.eps(kernel)
    exp = kernel.exp

    def field(state: State) -> State:
        q, p_log = state
        return (1 - exp(p_log), q * inv_eps)

    return field
