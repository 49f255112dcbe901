"""
Scalar kernels: machine doubles and extended-precision reals

Every numerical routine in layerbvp is written against a *kernel*, an object
that supplies conversion, the elementary functions and quadrature for one
scalar type. Two kernels exist:

    MachineKernel   - Python floats, elementary functions from ``math``
    ExtendedKernel  - mpmath ``mpf`` values of a private ``MPContext``

Each ExtendedKernel owns its own mpmath context, so precision travels with
the values it creates and no global ``mpmath.mp.dps`` is ever touched.

Usage:
    k = extended(50)
    x = k.mpf("0.1")
    y = k.exp(-15 * k.one)
    print(k.format(y))
"""

import logging
import math
import sys
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Optional, Tuple, Union

import mpmath
import numpy as np
from mpmath.ctx_mp import MPContext
from mpmath.libmp import repr_dps

from .errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

# A scalar is a float (machine kernel) or an mpf bound to one ExtendedKernel.
Scalar = Any

MIN_DIGITS = 16
DEFAULT_DIGITS = 50

# Gauss-Legendre rule at degree m has 3 * 2^(m - 1) nodes, as in mpmath
GL_MAX_DEGREE = 8

ELEMENTARY = ("exp", "log", "sqrt", "tanh", "sinh", "cosh", "sech", "atanh")


@dataclass(frozen=True)
class PrecisionConfig:
    """Decimal working precision of the extended kernel"""

    digits: int = DEFAULT_DIGITS

    def __post_init__(self):
        if isinstance(self.digits, bool) or not isinstance(self.digits, int):
            raise ConfigurationError(f"digits must be an integer, got {self.digits!r}")
        if self.digits < MIN_DIGITS:
            raise ConfigurationError(
                f"digits must be at least {MIN_DIGITS}, got {self.digits}"
            )


class MachineKernel:
    """IEEE double precision kernel"""

    name = "machine"
    extended = False
    digits = sys.float_info.dig
    eps = sys.float_info.epsilon
    zero = 0.0
    one = 1.0
    pi = math.pi
    e = math.e

    exp = staticmethod(math.exp)
    log = staticmethod(math.log)
    log1p = staticmethod(math.log1p)
    expm1 = staticmethod(math.expm1)
    sqrt = staticmethod(math.sqrt)
    tanh = staticmethod(math.tanh)
    sinh = staticmethod(math.sinh)
    cosh = staticmethod(math.cosh)
    atanh = staticmethod(math.atanh)
    isfinite = staticmethod(math.isfinite)

    def __init__(self):
        self._quad_context = mpmath.fp

    @property
    def precision_digits(self) -> Optional[int]:
        """Digits to rebuild this kernel in another process (None for machine)"""
        return None

    def mpf(self, x: Any) -> float:
        return float(x)

    def sech(self, x: float) -> float:
        a = abs(x)
        if a > 700.0:
            return 0.0
        return 1.0 / math.cosh(a)

    def format(self, x: Any, digits: Optional[int] = None) -> str:
        """Shortest round-trip repr, or a fixed number of significant digits"""
        x = float(x)
        if digits is None:
            return repr(x)
        return f"{x:.{digits}g}"

    def quad(self, f: Callable, a: Any, b: Any, method: str = "tanh-sinh",
             maxdegree: Optional[int] = None) -> Tuple[float, float]:
        if method == "gauss-legendre":
            # mpmath's fp context never finishes building Legendre nodes
            return _gauss_legendre(f, float(a), float(b), maxdegree or GL_MAX_DEGREE)
        value, error = self._quad_context.quad(f, [float(a), float(b)], method=method,
                                               error=True, maxdegree=maxdegree)
        return float(value), float(error)

    def __repr__(self):
        return "MachineKernel()"


@lru_cache(maxsize=None)
def _legendre_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _gauss_legendre(f: Callable, a: float, b: float, maxdegree: int) -> Tuple[float, float]:
    """
    Gauss-Legendre in doubles with degree doubling

    The error estimate is the change between the last two degrees.
    """
    half, mid = (b - a) / 2, (a + b) / 2
    previous = None
    value, error = math.nan, math.inf
    for m in range(1, maxdegree + 1):
        nodes, weights = _legendre_rule(3 * 2 ** (m - 1))
        value = half * math.fsum(float(w) * float(f(mid + half * float(u)))
                                 for u, w in zip(nodes, weights))
        if previous is not None:
            error = abs(value - previous)
            if not math.isfinite(value):
                break
            if error <= 4 * sys.float_info.epsilon * max(1.0, abs(value)):
                break
        previous = value
    return value, error


class ExtendedKernel:
    """Arbitrary precision kernel backed by a private mpmath context"""

    name = "extended"
    extended = True

    def __init__(self, digits: int = DEFAULT_DIGITS):
        PrecisionConfig(digits)
        ctx = MPContext()
        ctx.dps = digits
        self.ctx = ctx
        self.digits = digits
        self.eps = ctx.mpf(2) ** (1 - ctx.prec)
        self.zero = ctx.mpf(0)
        self.one = ctx.mpf(1)
        self.pi = +ctx.pi
        self.e = +ctx.e
        self.exp = ctx.exp
        self.log = ctx.ln
        self.sqrt = ctx.sqrt
        self.tanh = ctx.tanh
        self.sinh = ctx.sinh
        self.cosh = ctx.cosh
        self.sech = ctx.sech
        self.atanh = ctx.atanh
        self.mpf = ctx.mpf
        self._repr_digits = repr_dps(ctx.prec)

    @property
    def precision_digits(self) -> Optional[int]:
        return self.digits

    def log1p(self, x: Any) -> Any:
        ctx = self.ctx
        if abs(x) < self.eps:
            return x - x * x / 2
        with ctx.extraprec(ctx.prec):
            value = ctx.ln(1 + x)
        return +value

    def expm1(self, x: Any) -> Any:
        ctx = self.ctx
        if abs(x) < self.eps:
            return x + x * x / 2
        with ctx.extraprec(ctx.prec):
            value = ctx.exp(x) - 1
        return +value

    def isfinite(self, x: Any) -> bool:
        return not (self.ctx.isinf(x) or self.ctx.isnan(x))

    def format(self, x: Any, digits: Optional[int] = None) -> str:
        """Decimal string; the default digit count round-trips exactly"""
        n = self._repr_digits if digits is None else digits
        return self.ctx.nstr(self.ctx.mpf(x), n)

    def quad(self, f: Callable, a: Any, b: Any, method: str = "tanh-sinh",
             maxdegree: Optional[int] = None) -> Tuple[Any, Any]:
        return self.ctx.quad(f, [self.mpf(a), self.mpf(b)], method=method, error=True,
                             maxdegree=maxdegree)

    def __repr__(self):
        return f"ExtendedKernel(digits={self.digits})"


Kernel = Union[MachineKernel, ExtendedKernel]

MACHINE = MachineKernel()


@lru_cache(maxsize=None)
def extended(digits: int = DEFAULT_DIGITS) -> ExtendedKernel:
    """Shared ExtendedKernel for a digit count"""
    logger.debug("creating extended kernel with %d digits", digits)
    return ExtendedKernel(digits)


def kernel_for(digits: Optional[int]) -> Kernel:
    """Machine kernel for None, otherwise the extended kernel at that precision"""
    if digits is None:
        return MACHINE
    return extended(digits)


@dataclass(frozen=True)
class HPReal:
    """An extended-precision real carrying its working precision"""

    value: Any
    digits: int = DEFAULT_DIGITS

    @property
    def kernel(self) -> ExtendedKernel:
        return extended(self.digits)

    @classmethod
    def of(cls, x: Any, config: PrecisionConfig = PrecisionConfig()) -> "HPReal":
        return cls(extended(config.digits).mpf(x), config.digits)

    @classmethod
    def parse(cls, text: str, config: PrecisionConfig = PrecisionConfig()) -> "HPReal":
        """Parse a decimal string at the configured precision"""
        try:
            value = extended(config.digits).mpf(text.strip())
        except (ValueError, TypeError) as e:
            raise DomainError(f"not a decimal number: {text!r}") from e
        if not extended(config.digits).isfinite(value):
            raise DomainError(f"non-finite value: {text!r}")
        return cls(value, config.digits)

    def serialize(self) -> str:
        """Lossless decimal string"""
        return self.kernel.format(self.value)

    def __str__(self) -> str:
        return self.kernel.format(self.value, self.digits)

    def __float__(self) -> float:
        return float(self.value)

    def __add__(self, other):
        return arith(self, _coerce(other, self.digits), "+")

    def __sub__(self, other):
        return arith(self, _coerce(other, self.digits), "-")

    def __mul__(self, other):
        return arith(self, _coerce(other, self.digits), "*")

    def __truediv__(self, other):
        return arith(self, _coerce(other, self.digits), "/")

    def __neg__(self):
        return HPReal(-self.value, self.digits)

    def __lt__(self, other):
        return self.value < _coerce(other, self.digits).value

    def __eq__(self, other):
        if not isinstance(other, (HPReal, int, float, str)):
            return NotImplemented
        return self.value == _coerce(other, self.digits).value

    def __hash__(self):
        return hash((self.serialize(), self.digits))


def _coerce(x: Any, digits: int) -> HPReal:
    if isinstance(x, HPReal):
        return x
    return HPReal(extended(digits).mpf(x), digits)


_OPERATORS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "−": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "×": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "÷": lambda a, b: a / b,
}


def arith(a: HPReal, b: HPReal, op: str) -> HPReal:
    """Correctly rounded a op b at the larger of the two precisions"""
    if op not in _OPERATORS:
        raise DomainError(f"unknown operator {op!r}")
    digits = max(a.digits, b.digits)
    k = extended(digits)
    x, y = k.mpf(a.value), k.mpf(b.value)
    if op in ("/", "÷") and y == 0:
        raise DomainError("division by zero")
    return HPReal(_OPERATORS[op](x, y), digits)


def elem(x: HPReal, name: str) -> HPReal:
    """Elementary function of an HPReal with domain checking"""
    if name not in ELEMENTARY:
        raise DomainError(f"unknown function {name!r}; expected one of {ELEMENTARY}")
    k = x.kernel
    v = x.value
    if name == "log" and v <= 0:
        raise DomainError(f"log requires x > 0, got {k.format(v, 10)}")
    if name == "sqrt" and v < 0:
        raise DomainError(f"sqrt requires x >= 0, got {k.format(v, 10)}")
    if name == "atanh" and abs(v) >= 1:
        raise DomainError(f"atanh requires |x| < 1, got {k.format(v, 10)}")
    return HPReal(getattr(k, name)(v), x.digits)
