"""
Bracketing root finder and sign-change helpers

brentq follows the classic Brent/Dekker scheme (secant or inverse quadratic
interpolation, falling back to bisection) and works with any scalar type
that supports ordinary arithmetic and comparisons, so the same code polishes
roots in machine and in extended precision.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence, Tuple

from .errors import BracketError, NonConvergenceError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RootResult:
    root: Any
    value: Any
    iterations: int
    function_calls: int
    converged: bool


def _sign(v: Any) -> int:
    return (v > 0) - (v < 0)


def brentq(f: Callable[[Any], Any], xa: Any, xb: Any, xtol: Any = 2e-12,
           rtol: Any = 8.9e-16, max_iter: int = 200, fa: Any = None,
           fb: Any = None, raise_on_failure: bool = True) -> RootResult:
    """
    Find a root of f in [xa, xb]

    f(xa) and f(xb) must have opposite signs (known values can be passed as
    fa/fb to save evaluations). Iteration stops once the bracket half-width
    drops below xtol + rtol*|x| or f hits zero exactly.
    """
    calls = 0
    xpre, xcur = xa, xb
    if fa is None:
        fa = f(xpre)
        calls += 1
    if fb is None:
        fb = f(xcur)
        calls += 1
    fpre, fcur = fa, fb

    if fpre == 0:
        return RootResult(xpre, fpre, 0, calls, True)
    if fcur == 0:
        return RootResult(xcur, fcur, 0, calls, True)
    if _sign(fpre) == _sign(fcur):
        raise BracketError(f"no sign change on [{xa}, {xb}]: f = {fpre}, {fcur}")

    xblk, fblk = xpre, fpre
    spre = scur = xcur - xpre

    for i in range(max_iter):
        if _sign(fpre) != _sign(fcur) and fpre != 0 and fcur != 0:
            xblk, fblk = xpre, fpre
            spre = scur = xcur - xpre

        if abs(fblk) < abs(fcur):
            xpre, xcur, xblk = xcur, xblk, xcur
            fpre, fcur, fblk = fcur, fblk, fcur

        delta = (xtol + rtol * abs(xcur)) / 2
        sbis = (xblk - xcur) / 2
        if fcur == 0 or abs(sbis) < delta:
            return RootResult(xcur, fcur, i + 1, calls, True)

        if abs(spre) > delta and abs(fcur) < abs(fpre):
            if xpre == xblk:
                # secant
                stry = -fcur * (xcur - xpre) / (fcur - fpre)
            else:
                # inverse quadratic
                dpre = (fpre - fcur) / (xpre - xcur)
                dblk = (fblk - fcur) / (xblk - xcur)
                stry = -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            if 2 * abs(stry) < min(abs(spre), 3 * abs(sbis) - delta):
                spre, scur = scur, stry
            else:
                spre, scur = sbis, sbis
        else:
            spre, scur = sbis, sbis

        xpre, fpre = xcur, fcur
        if abs(scur) > delta:
            xcur = xcur + scur
        else:
            xcur = xcur + (delta if sbis > 0 else -delta)

        fcur = f(xcur)
        calls += 1
        logger.debug("brentq iter %d: x=%s f=%s", i, xcur, fcur)

    if raise_on_failure:
        raise NonConvergenceError(f"brentq did not converge in {max_iter} iterations",
                                  last_state=(xcur, fcur))
    return RootResult(xcur, fcur, max_iter, calls, False)


def sign_changes(values: Sequence[Any]) -> List[Tuple[int, int]]:
    """Index pairs (i, i+1) where consecutive values change sign; exact zeros count once"""
    pairs = []
    previous: Optional[int] = None
    for i, v in enumerate(values):
        s = _sign(v)
        if s == 0:
            if previous is not None and previous != 0:
                pairs.append((i - 1, i))
            previous = 0
            continue
        if previous is not None and previous != 0 and s != previous:
            pairs.append((i - 1, i))
        previous = s
    return pairs
