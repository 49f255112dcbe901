"""
Closed-form asymptotics: outer, inner and composite solutions, slope formulas

Outer solutions are the lines y = x + a. Each layer has the inner solution

    Y0(X) = b tanh(c - b X / 2),    X = (x - x0) / eps

and the composite y = x + shift + Y0 with

    M   x0 = 1/2   b = -3/2   c = 0            shift = -1/2
    B0  x0 = 0     b = -2     c = -atanh(1/2)  shift = 0
    B1  x0 = 1     b = -2     c = +atanh(1/2)  shift = -1

First-order composites are the inner solutions Y0 + eps Y1 alone (the outer
and overlap parts cancel). B1 is always evaluated as the mirror of B0.

Slope predictions:

    slope_b0        y'_B0(0) = -3/(2 eps) + 1 + log 16
    slope_m_layer   y'_M(1/2) = -9/(8 eps) + 1 + log 4
    transfer_gap    1 - z0 = -W(-(1 - z1) exp((1 - y1^2)/(2 eps) - (1 - z1)))
    slope_tst       1 - y'(0) for B1 and M, in leading, expanded and lambert forms
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from .dynamics import Params, curve_symmetry
from .errors import DomainError, InvalidBranchError, NoCrossingError
from .export import write_csv
from .hpreal import MACHINE, Kernel
from .special import WBranch, dilog, lambert_w

logger = logging.getLogger(__name__)

LEFT = "left"
RIGHT = "right"

# Inner coordinate beyond which the first-order corrections use their tails
TAIL_X = 40.0

TST_FORMS = ("leading", "expanded", "lambert")


class Branch(Enum):
    """The three solutions of the boundary value problem"""

    B0 = "b0"
    M = "m"
    B1 = "b1"

    @classmethod
    def parse(cls, text: str) -> "Branch":
        key = text.strip().lower()
        for branch in cls:
            if branch.value == key:
                return branch
        raise InvalidBranchError(f"unknown branch {text!r}; expected b0, m or b1")

    @property
    def mirror(self) -> "Branch":
        return {Branch.B0: Branch.B1, Branch.B1: Branch.B0, Branch.M: Branch.M}[self]


def outer(side: str, x: Any) -> Any:
    """y = 1 + x on the left, y = x - 2 on the right"""
    if side == LEFT:
        return 1 + x
    if side == RIGHT:
        return x - 2
    raise DomainError(f"side must be 'left' or 'right', got {side!r}")


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def _log4(k: Kernel) -> Any:
    return 2 * k.log(2 * k.one)


def m_constants(k: Kernel = MACHINE) -> Tuple[Any, Any]:
    """(c1, c2) = (1 + log 4, pi^2/18) of the first-order M inner solution"""
    return 1 + _log4(k), k.pi ** 2 / 18


def m_constants_from_conditions(k: Kernel = MACHINE) -> Tuple[Any, Any]:
    """
    Solve for (c1, c2) from the two conditions that fix them

    Y1(0) = 0 leaves 16 Li2(-1) + 24 c2 = 0, and a vanishing tail offset
    (2/3)(c1 - 1 - log 4) = 0 fixes c1.
    """
    c2 = -2 * dilog(-k.one, k) / 3
    c1 = 1 + _log4(k)
    return c1, c2


def b0_constants(k: Kernel = MACHINE) -> Tuple[Any, Any]:
    """(c1, c2) of the first-order B0 inner solution, c2 ~ 2.594"""
    log3 = k.log(3 * k.one)
    c1 = 1 + k.log(12 * k.one)
    c2 = (-4 * dilog(-3 * k.one, k) + log3 ** 2 + 4 * k.log(6912 * k.one) / 3) / 8
    return c1, c2


def b0_constants_from_conditions(k: Kernel = MACHINE) -> Tuple[Any, Any]:
    """
    (c1, c2) from Y1(-atanh(1/2)) = 0 and the tail offset atanh(1/2)

    The offset condition reads (c1 - 1 - log 4)/2 = log(3)/2; the boundary
    condition at the wall then leaves a linear equation for c2.
    """
    log2 = k.log(2 * k.one)
    log3 = k.log(3 * k.one)
    c1 = 1 + 2 * log2 + log3
    c2 = (-2 * dilog(-3 * k.one, k) + log3 ** 2 / 2 + 2 * log3 + 16 * log2 / 3) / 4
    return c1, c2


def m_tail_offset(c1: Any, k: Kernel = MACHINE) -> Any:
    """lim Y1 - X as X -> +infinity for the M inner solution"""
    return 2 * (c1 - 1 - _log4(k)) / 3


def b0_tail_offset(c1: Any, k: Kernel = MACHINE) -> Any:
    """lim Y1 - Xb as Xb -> +infinity for the B0 inner solution"""
    return (c1 - 1 - _log4(k)) / 2


def _tail_x(k: Kernel) -> float:
    if k.extended:
        return max(TAIL_X, 1.6 * k.digits)
    return TAIL_X


# ---------------------------------------------------------------------------
# inner solutions
# ---------------------------------------------------------------------------

def inner_order0(X: Any, b: Any, c: Any, k: Kernel = MACHINE) -> Tuple[Any, Any]:
    """Y0 = b tanh(c - b X/2) and dY0/dX"""
    arg = c - b * X / 2
    return b * k.tanh(arg), -(b * b / 2) * k.sech(arg) ** 2


def m_inner_order1(X: Any, c1: Any, c2: Any, k: Kernel = MACHINE) -> Tuple[Any, Any]:
    """
    First-order M correction Y1(X) and dY1/dX

    With s = 3X/4, S = sech^2 s and L = 2 log cosh s - 1 + c1:

        24 Y1 / S = 16 Li2(-e^(-3X/2)) + 24 c2 + 3X(3X + 4 + 4 c1 - 8 log 2)
                    + 8 sinh(3X/2) L
    """
    if abs(X) > _tail_x(k):
        sign = 1 if X > 0 else -1
        return X + sign * m_tail_offset(c1, k), k.one

    log2 = k.log(2 * k.one)
    s = 3 * X / 4
    S = k.sech(s) ** 2
    T = k.tanh(s)
    kappa = 4 + 4 * c1 - 8 * log2
    L = 2 * k.log(k.cosh(s)) - 1 + c1
    e = k.exp(-3 * X / 2)
    sh = k.sinh(3 * X / 2)
    ch = k.cosh(3 * X / 2)

    bracket = 16 * dilog(-e, k) + 24 * c2 + 3 * X * (3 * X + kappa) + 8 * sh * L
    dbracket = 24 * k.log1p(e) + 18 * X + 3 * kappa + 12 * ch * L + 12 * sh * T
    y1 = S * bracket / 24
    dy1 = S * (dbracket - 3 * T * bracket / 2) / 24
    return y1, dy1


def b0_inner_order1(X: Any, c1: Any, c2: Any, k: Kernel = MACHINE) -> Tuple[Any, Any]:
    """
    First-order B0 correction Y1 and dY1/dX, X = x/eps

    With Xb = X - atanh(1/2), S = sech^2 Xb:

        4 Y1 / S = 4 c2 + 2 Xb (Xb + 1 + c1 - log 4)
                   + sinh(2 Xb)(c1 - 1 + 2 log cosh Xb) + 2 Li2(-e^(-2 Xb))
    """
    xb = X - k.atanh(k.one / 2)
    if xb > _tail_x(k):
        return xb + b0_tail_offset(c1, k), k.one

    log4 = _log4(k)
    S = k.sech(xb) ** 2
    T = k.tanh(xb)
    L = c1 - 1 + 2 * k.log(k.cosh(xb))
    e = k.exp(-2 * xb)
    sh = k.sinh(2 * xb)
    ch = k.cosh(2 * xb)

    bracket = 4 * c2 + 2 * xb * (xb + 1 + c1 - log4) + sh * L + 2 * dilog(-e, k)
    dbracket = 2 * (2 * xb + 1 + c1 - log4) + 2 * ch * L + 2 * sh * T + 4 * k.log1p(e)
    y1 = S * bracket / 4
    dy1 = S * (dbracket - 2 * T * bracket) / 4
    return y1, dy1


# ---------------------------------------------------------------------------
# composites
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompositeSolution:
    """An evaluable matched-asymptotic approximation"""

    branch: Branch
    order: int
    params: Params
    constants: Dict[str, Any] = field(default_factory=dict)
    kernel: Kernel = MACHINE

    @property
    def description(self) -> str:
        return f"{self.branch.value} order {self.order}"


def composite(branch: Branch, order: int, params: Params, kernel: Kernel = MACHINE,
              c1: Optional[Any] = None, c2: Optional[Any] = None) -> CompositeSolution:
    """
    Build the composite for a branch and order

    c1/c2 override the first-order constants (B0 constants for B0 and B1,
    M constants for M).
    """
    if order not in (0, 1):
        raise DomainError(f"order must be 0 or 1, got {order!r}")
    k = kernel
    half = k.one / 2
    a = k.atanh(half)
    if branch is Branch.M:
        constants = {"a_left": k.one, "a_right": -2 * k.one, "b": -3 * half, "c": k.zero,
                     "x0": half, "shift": -half}
        default = m_constants(k)
    elif branch is Branch.B0:
        constants = {"a_right": -2 * k.one, "b": -2 * k.one, "c": -a, "x0": k.zero,
                     "shift": k.zero}
        default = b0_constants(k)
    else:
        constants = {"a_left": k.one, "b": -2 * k.one, "c": a, "x0": k.one,
                     "shift": -k.one}
        default = b0_constants(k)
    constants["delta"] = params.eps(k)
    if order == 1:
        constants["c1"] = default[0] if c1 is None else k.mpf(c1)
        constants["c2"] = default[1] if c2 is None else k.mpf(c2)
    return CompositeSolution(branch, order, params, constants, k)


def composite_eval(cs: CompositeSolution, x: Any) -> Tuple[Any, Any]:
    """(y, dy/dx) of the composite at x in [0, 1]"""
    k = cs.kernel
    x = k.mpf(x)
    if x < 0 or x > 1:
        raise DomainError(f"composite is defined on [0, 1], got x={x}")
    eps = cs.params.eps(k)
    const = cs.constants

    if cs.order == 0:
        X = (x - const["x0"]) / eps
        y0, dy0 = inner_order0(X, const["b"], const["c"], k)
        return x + const["shift"] + y0, 1 + dy0 / eps

    if cs.branch is Branch.B1:
        mirror = composite(Branch.B0, 1, cs.params, k, c1=const["c1"], c2=const["c2"])
        xm, _ = curve_symmetry(x, k.zero)
        y, dy = composite_eval(mirror, xm)
        return -y, dy

    X = (x - const["x0"]) / eps
    y0, dy0 = inner_order0(X, const["b"], const["c"], k)
    if cs.branch is Branch.M:
        y1, dy1 = m_inner_order1(X, const["c1"], const["c2"], k)
    else:
        y1, dy1 = b0_inner_order1(X, const["c1"], const["c2"], k)
    return y0 + eps * y1, dy0 / eps + dy1


def composite_curve(cs: CompositeSolution, n: int = 1001) -> List[Tuple[Any, Any, Any]]:
    """(x, y, y') on a uniform grid of n points over [0, 1]"""
    if n < 2:
        raise DomainError(f"need at least 2 grid points, got {n}")
    k = cs.kernel
    rows = []
    for i in range(n):
        x = k.mpf(i) / (n - 1)
        y, dy = composite_eval(cs, x)
        rows.append((x, y, dy))
    return rows


def write_composite_csv(cs: CompositeSolution, path, n: int = 1001):
    k = cs.kernel
    rows = [[k.format(x), k.format(y), k.format(dy)] for x, y, dy in composite_curve(cs, n)]
    meta = {"branch": cs.branch.value, "order": cs.order, "epsilon": cs.params.epsilon,
            "precision": k.digits if k.extended else "machine"}
    for key in ("c1", "c2"):
        if key in cs.constants:
            meta[key] = k.format(cs.constants[key])
    return write_csv(path, ["x", "y", "y_prime"], rows, meta)


# ---------------------------------------------------------------------------
# slopes
# ---------------------------------------------------------------------------

def slope_b0(params: Params, kernel: Kernel = MACHINE) -> Any:
    """-3/(2 eps) + 1 + log 16"""
    k = kernel
    eps = params.eps(k)
    return -3 / (2 * eps) + 1 + 2 * _log4(k)


def slope_m_layer(params: Params, kernel: Kernel = MACHINE) -> Any:
    """Slope of M at the layer centre x = 1/2: -9/(8 eps) + 1 + log 4"""
    k = kernel
    eps = params.eps(k)
    return -9 / (8 * eps) + 1 + _log4(k)


def transfer_gap(y1: Any, z1: Any, params: Params, branch: WBranch = WBranch.PRINCIPAL,
                 kernel: Kernel = MACHINE) -> Any:
    """1 - z0 at y = 1 on the trajectory through (y1, z1)"""
    k = kernel
    y1, z1 = k.mpf(y1), k.mpf(z1)
    if not z1 < 1:
        raise DomainError(f"slope transfer requires z1 < 1, got {z1}")
    eps = params.eps(k)
    u1 = 1 - z1
    argument = -u1 * k.exp((1 - y1 * y1) / (2 * eps) - u1)
    try:
        return -lambert_w(argument, branch, k)
    except DomainError as e:
        raise NoCrossingError(
            f"trajectory through (y, z) = ({y1}, {z1}) does not reach y = 1 on the "
            f"{branch.name.lower()} branch"
        ) from e


def slope_transfer(y1: Any, z1: Any, params: Params, branch: WBranch = WBranch.PRINCIPAL,
                   kernel: Kernel = MACHINE) -> Any:
    """Slope z0 at y = 1 on the trajectory through (y1, z1)"""
    return 1 - transfer_gap(y1, z1, params, branch, kernel)


def slope_tst(branch: Branch, params: Params, form: str = "leading",
              kernel: Kernel = MACHINE) -> Any:
    """
    Predicted 1 - y'(0) for B1 and M

    leading   B1: (24/eps) e^(-3/(2 eps))        M: (9/(2 eps)) e^(-5/(8 eps))
    expanded  B1: [3/(2 eps) - log 16] e^(-3/(2 eps) + log 16)
              M:  [9/(8 eps) - log 4] e^(-5/(8 eps) + log 4)
    lambert   the W0 transfer of the B0 slope from y = -1 (B1) or of the
              layer slope from y = 0 (M)
    """
    if branch is Branch.B0:
        raise InvalidBranchError("B0's initial slope is not transcendentally close to 1")
    if form not in TST_FORMS:
        raise DomainError(f"form must be one of {TST_FORMS}, got {form!r}")
    k = kernel
    eps = params.eps(k)
    log4 = _log4(k)

    if branch is Branch.B1:
        if form == "leading":
            return 24 / eps * k.exp(-3 / (2 * eps))
        if form == "expanded":
            return (3 / (2 * eps) - 2 * log4) * k.exp(-3 / (2 * eps) + 2 * log4)
        return transfer_gap(-k.one, slope_b0(params, k), params, WBranch.PRINCIPAL, k)

    if form == "leading":
        return 9 / (2 * eps) * k.exp(-5 / (8 * eps))
    if form == "expanded":
        return (9 / (8 * eps) - log4) * k.exp(-5 / (8 * eps) + log4)
    return transfer_gap(k.zero, slope_m_layer(params, k), params, WBranch.PRINCIPAL, k)


@dataclass(frozen=True)
class NaiveSlopeDiagnostic:
    """
    Gap 1 - y'(0) of M read off the composite derivative, next to the transfer result

    Differentiating the composite at x = 0 keeps only the tail of the layer
    profile and misses the transcendentally small term that actually sets the
    slope; the transfer gap is the correct prediction.
    """

    epsilon: float
    naive_order0: Any
    naive_order1: Any
    series_order0: Any
    series_order1: Any
    transfer: Any

    @property
    def ratio(self) -> Any:
        """naive first-order gap over the transfer gap"""
        return self.naive_order1 / self.transfer


def naive_slope_diagnostic(params: Params, kernel: Kernel = MACHINE) -> NaiveSlopeDiagnostic:
    k = kernel
    eps = params.eps(k)
    cs0 = composite(Branch.M, 0, params, k)
    cs1 = composite(Branch.M, 1, params, k)
    X0 = -1 / (2 * eps)

    # 1 - y'(0) without forming y'(0): order 0 is -Y0'/eps, order 1 adds 1 - Y1'
    _, dy0 = inner_order0(X0, cs0.constants["b"], cs0.constants["c"], k)
    naive0 = -dy0 / eps
    _, dy1 = m_inner_order1(X0, cs1.constants["c1"], cs1.constants["c2"], k)
    naive1 = -dy0 / eps + (1 - dy1)

    decay = k.exp(-3 / (4 * eps))
    series0 = 9 / (2 * eps) * decay
    series1 = decay * (9 / (16 * eps ** 2) + 9 / (2 * eps) + k.pi ** 2 / 3)
    transfer = slope_tst(Branch.M, params, "lambert", k)
    logger.debug("naive slope gaps at eps=%s: order0=%s order1=%s transfer=%s",
                 params.epsilon, naive0, naive1, transfer)
    return NaiveSlopeDiagnostic(params.epsilon, naive0, naive1, series0, series1, transfer)
