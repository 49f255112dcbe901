"""
Real Lambert W (branches W0 and W-1) and the real dilogarithm Li2

Both functions take an optional scalar kernel and run at its precision.

Lambert W uses Halley's iteration on w*exp(w) = x with branch-dependent
starting values: the square-root expansion about the branch point -1/e, the
power series about 0 for W0, and the log-log expansion for W0 at large x
and for W-1 near 0-.

The dilogarithm sums its power series on |x| <= 1/2 and reaches every other
x <= 1 through the reflection, Landen and inversion identities.
"""

import logging
from enum import Enum
from typing import Any

from .errors import DomainError
from .hpreal import MACHINE, Kernel

logger = logging.getLogger(__name__)

MAX_HALLEY_ITERATIONS = 100


class WBranch(Enum):
    """Real branches of the Lambert W function"""

    PRINCIPAL = 0
    LOWER = -1

    @classmethod
    def parse(cls, text: str) -> "WBranch":
        key = text.strip().lower()
        if key in ("principal", "w0", "0"):
            return cls.PRINCIPAL
        if key in ("lower", "w-1", "-1"):
            return cls.LOWER
        raise DomainError(f"unknown Lambert W branch {text!r}")


def _branch_point_seed(p: Any, sign: int) -> Any:
    # w = -1 + s*p - p^2/3 + s*11/72 p^3 with p = sqrt(2(e*x + 1))
    return -1 + sign * p - p * p / 3 + sign * 11 * p * p * p / 72


# coefficients of p^n in W about -1/e, p = +/- sqrt(2(e*x + 1))
_BRANCH_SERIES = ((-1, 1), (1, 1), (-1, 3), (11, 72), (-43, 540), (769, 17280),
                  (-221, 8505), (680863, 43545600))


def _branch_point_series(p: Any, sign: int, k: Kernel) -> Any:
    q = sign * p
    total = k.zero
    for num, den in reversed(_BRANCH_SERIES):
        total = total * q + k.mpf(num) / den
    return total


def _seed(x: Any, branch: WBranch, p: Any, k: Kernel) -> Any:
    if branch is WBranch.PRINCIPAL:
        if p < 0.5:
            return _branch_point_seed(p, +1)
        if abs(x) <= 0.25:
            return x - x * x + 3 * x ** 3 / 2 - 8 * x ** 4 / 3
        if x < 0:
            return _branch_point_seed(p, +1)
        if x <= 3:
            return k.log1p(x) * 0.8
        l1 = k.log(x)
        l2 = k.log(l1)
        return l1 - l2 + l2 / l1
    if p < 0.8:
        return _branch_point_seed(p, -1)
    l1 = k.log(-x)
    l2 = k.log(-l1)
    return l1 - l2 + l2 / l1


def lambert_w(x: Any, branch: WBranch = WBranch.PRINCIPAL, kernel: Kernel = MACHINE) -> Any:
    """
    Real Lambert W on the requested branch

    Principal is defined for x >= -1/e and returns w >= -1; Lower is defined
    for -1/e <= x < 0 and returns w <= -1.
    """
    k = kernel
    x = k.mpf(x)
    if not k.isfinite(x):
        raise DomainError("lambert_w argument must be finite")
    inv_e = k.exp(-k.one)
    r = x + inv_e
    if r < 0:
        # Arguments that miss -1/e only by rounding are the branch point itself
        if r > -8 * k.eps * inv_e:
            return -k.one
        raise DomainError(f"lambert_w argument {k.format(x, 17)} is below -1/e")
    if branch is WBranch.LOWER and x >= 0:
        raise DomainError(f"lower branch requires -1/e <= x < 0, got {k.format(x, 17)}")
    if x == 0:
        return k.zero
    if r == 0:
        return -k.one

    p = k.sqrt(2 * k.e * r)
    sign = 1 if branch is WBranch.PRINCIPAL else -1
    if p ** len(_BRANCH_SERIES) < k.eps:
        # the truncated series is exact to working precision
        w = _branch_point_series(p, sign, k)
    else:
        w = _halley(x, _seed(x, branch, p, k), k)

    # Rounding can push a result sitting on the branch point across -1
    if branch is WBranch.PRINCIPAL and w < -1:
        w = -k.one
    elif branch is WBranch.LOWER and w > -1:
        w = -k.one
    return w


def _halley(x: Any, w: Any, k: Kernel) -> Any:
    """
    Halley's iteration on w*exp(w) = x

    Stops once the residual or the step is within 4 ulp. Near -1/e the slope
    (w + 1)e^w vanishes and the steps settle on rounding noise well above
    4 ulp of w; a step below sqrt(eps) that no longer shrinks also stops it.
    """
    tol = 4 * k.eps
    noise = k.sqrt(k.eps)
    previous = None
    for _ in range(MAX_HALLEY_ITERATIONS):
        ew = k.exp(w)
        wew = w * ew
        f = wew - x
        if abs(f) <= tol * max(abs(x), abs(wew)):
            return w
        w1 = w + 1
        if w1 == 0:
            return w
        dw = f / (ew * w1 - (w + 2) * f / (2 * w1))
        w = w - dw
        if abs(dw) <= tol * abs(w):
            return w
        if previous is not None and noise * abs(w) > abs(dw) >= previous:
            logger.debug("lambert_w: steps stalled at %s for x=%s",
                         k.format(abs(dw), 3), k.format(x, 17))
            return w
        previous = abs(dw)
    logger.warning("lambert_w: Halley iteration did not settle for x=%s", k.format(x, 17))
    return w


def _dilog_series(x: Any, k: Kernel) -> Any:
    total = k.zero
    power = k.one
    n = 0
    limit = 8 * max(k.digits, 16) + 40
    while n < limit:
        n += 1
        power = power * x
        term = power / (n * n)
        total = total + term
        if abs(term) <= k.eps * abs(total):
            break
    return total


def dilog(x: Any, kernel: Kernel = MACHINE) -> Any:
    """Real dilogarithm Li2(x) = sum x^n/n^2 for x <= 1"""
    k = kernel
    x = k.mpf(x)
    if not k.isfinite(x):
        raise DomainError("dilog argument must be finite")
    if x > 1:
        raise DomainError(f"dilog is complex for x > 1, got {k.format(x, 17)}")
    if x == 1:
        return k.pi ** 2 / 6
    if x == 0:
        return k.zero
    if abs(x) <= 0.5:
        return _dilog_series(x, k)
    if x > 0:
        # reflection, 1 - x in (0, 1/2)
        return k.pi ** 2 / 6 - k.log(x) * k.log(1 - x) - _dilog_series(1 - x, k)
    if x >= -1:
        # Landen, x/(x-1) in [1/3, 1/2]
        return -_dilog_series(x / (x - 1), k) - k.log(1 - x) ** 2 / 2
    # inversion, 1/x in (-1, 0)
    return -k.pi ** 2 / 6 - k.log(-x) ** 2 / 2 - dilog(1 / x, k)
