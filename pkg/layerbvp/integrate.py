"""
Time integration and singular-endpoint quadrature

The integrator is the Dormand-Prince 5(4) embedded pair with FSAL,
standard error-per-step control and cubic Hermite dense output on the
accepted step endpoints. It is written against a scalar kernel, so the same
code runs on floats and on extended-precision mpf values.

Trajectories with z < 1 can be integrated in canonical coordinates
(Q, P) = (y, log(1 - z)); samples are reported as PhasePoints either way
and the exact gap 1 - z = e^P stays available through Trajectory.gap().
"""

import bisect
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, List, Optional, Sequence, Tuple

from .dynamics import (
    Params,
    PhasePoint,
    State,
    canonical_field,
    cartesian_field,
    conserved,
    conserved_canonical,
    from_canonical,
    to_canonical,
)
from .errors import (
    BlowUpError,
    ConfigurationError,
    DomainError,
    NoCrossingError,
    NonConvergenceError,
    QuadratureError,
)
from .export import write_csv
from .hpreal import MACHINE, Kernel
from .roots import brentq

logger = logging.getLogger(__name__)

CARTESIAN = "cartesian"
CANONICAL = "canonical"

# Dormand-Prince 5(4) tableau as exact rationals (numerator, denominator)
_A = (
    (),
    ((1, 5),),
    ((3, 40), (9, 40)),
    ((44, 45), (-56, 15), (32, 9)),
    ((19372, 6561), (-25360, 2187), (64448, 6561), (-212, 729)),
    ((9017, 3168), (-355, 33), (46732, 5247), (49, 176), (-5103, 18656)),
    ((35, 384), (0, 1), (500, 1113), (125, 192), (-2187, 6784), (11, 84)),
)
# fifth-order minus embedded fourth-order weights
_E = ((71, 57600), (0, 1), (-71, 16695), (71, 1920), (-17253, 339200), (22, 525), (-1, 40))

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and budgets for one integration"""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 100_000
    dense_output: bool = True
    max_step: Optional[float] = None
    blowup_threshold: float = 1e150

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigurationError("rel_tol and abs_tol must be positive")
        if self.max_steps <= 0:
            raise ConfigurationError("max_steps must be positive")
        if self.max_step is not None and not self.max_step > 0:
            raise ConfigurationError("max_step must be positive when given")

    @classmethod
    def for_kernel(cls, kernel: Kernel, **overrides) -> "IntegratorConfig":
        """Default tolerances for a scalar kernel"""
        if kernel.extended:
            # canonical coordinates carry the slow-strip gap; 1e-13 is the floor
            rel_tol = max(10.0 ** (8 - kernel.digits), 1e-13)
            base = {"rel_tol": rel_tol, "abs_tol": rel_tol * 1e-2, "max_steps": 400_000}
        else:
            base = {}
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class TerminalEvent:
    description: str
    time: Any


@lru_cache(maxsize=None)
def _tableau(kernel: Kernel):
    def r(pair):
        return kernel.mpf(pair[0]) / pair[1]

    a = tuple(tuple(r(p) for p in row) for row in _A)
    e = tuple(r(p) for p in _E)
    return a, e


def _hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return tuple(h00 * a + h10 * h * da + h01 * b + h11 * h * db
                 for a, da, b, db in zip(y0, f0, y1, f1))


@dataclass
class Trajectory:
    """
    Sampled solution of the system

    times/states/derivatives hold the raw integration variables (y, z) or
    (Q, P) according to ``coordinates``; samples and points() always speak
    PhasePoints.
    """

    times: List[Any]
    states: List[State]
    derivatives: List[State]
    params: Params
    kernel: Kernel = MACHINE
    coordinates: str = CARTESIAN
    terminal_event: Optional[TerminalEvent] = None
    dense_output: bool = True
    label: str = ""

    def __len__(self) -> int:
        return len(self.times)

    @property
    def samples(self) -> List[Tuple[Any, PhasePoint]]:
        return [(t, self._to_point(s)) for t, s in zip(self.times, self.states)]

    def _to_point(self, state: State) -> PhasePoint:
        if self.coordinates == CANONICAL:
            return from_canonical(state[0], state[1], self.kernel)
        return PhasePoint(state[0], state[1])

    def point(self, i: int) -> PhasePoint:
        return self._to_point(self.states[i])

    def points(self) -> List[PhasePoint]:
        return [self._to_point(s) for s in self.states]

    @property
    def final_time(self) -> Any:
        return self.times[-1]

    @property
    def final_point(self) -> PhasePoint:
        return self.point(-1)

    def gap(self, i: int) -> Any:
        """1 - z at sample i, exact in canonical coordinates"""
        state = self.states[i]
        if self.coordinates == CANONICAL:
            return self.kernel.exp(state[1])
        return 1 - state[1]

    def log_gap(self, i: int) -> Any:
        state = self.states[i]
        if self.coordinates == CANONICAL:
            return state[1]
        return self.kernel.log(1 - state[1])

    def conserved_values(self) -> List[Any]:
        """C^2 at every sample"""
        if self.coordinates == CANONICAL:
            return [conserved_canonical(q, p, self.params, self.kernel).c_squared
                    for q, p in self.states]
        return [conserved(PhasePoint(y, z), self.params, self.kernel).c_squared
                for y, z in self.states]

    def max_conserved_drift(self) -> Any:
        values = self.conserved_values()
        return max(abs(v - values[0]) for v in values)

    def evaluate_state(self, t: Any) -> State:
        """Raw state at time t by cubic Hermite interpolation"""
        if not self.dense_output:
            raise ConfigurationError("trajectory was integrated without dense output")
        if t < self.times[0] or t > self.times[-1]:
            raise DomainError(f"t={t} outside [{self.times[0]}, {self.times[-1]}]")
        i = bisect.bisect_right(self.times, t) - 1
        if i >= len(self.times) - 1:
            return self.states[-1]
        return _hermite(self.times[i], self.states[i], self.derivatives[i],
                        self.times[i + 1], self.states[i + 1], self.derivatives[i + 1], t)

    def evaluate(self, t: Any) -> PhasePoint:
        return self._to_point(self.evaluate_state(t))


def _error_norm(err: Sequence[Any], y0: State, y1: State, cfg: IntegratorConfig) -> float:
    total = 0.0
    for e, a, b in zip(err, y0, y1):
        scale = cfg.abs_tol + cfg.rel_tol * max(abs(float(a)), abs(float(b)))
        total += (float(e) / scale) ** 2
    return math.sqrt(total / len(err))


def _initial_step(field, y0, f0, span, kernel, cfg) -> Any:
    def norm(vec):
        total = 0.0
        for v, a in zip(vec, y0):
            scale = cfg.abs_tol + cfg.rel_tol * abs(float(a))
            total += (float(v) / scale) ** 2
        return math.sqrt(total / len(vec))

    d0, d1 = norm(y0), norm(f0)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    if span is not None:
        h0 = min(h0, float(span))
    try:
        y1 = tuple(a + kernel.mpf(h0) * b for a, b in zip(y0, f0))
        f1 = field(y1)
        d2 = norm(tuple(b - a for a, b in zip(f0, f1))) / h0
    except OverflowError:
        d2 = float("inf")
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100 * h0, h1)
    if cfg.max_step is not None:
        h = min(h, cfg.max_step)
    if span is not None:
        h = min(h, float(span))
    return kernel.mpf(h)


def _all_finite(state: State, kernel: Kernel, threshold: float) -> bool:
    return all(kernel.isfinite(v) and abs(v) <= threshold for v in state)


def dormand_prince(field: Callable[[State], State], y0: State, t_end: Optional[Any],
                   kernel: Kernel = MACHINE, cfg: IntegratorConfig = IntegratorConfig(),
                   event: Optional[Callable[[State], Any]] = None,
                   event_description: str = "event"):
    """
    Integrate y' = field(y) from t = 0

    Runs to t_end (clipping the last step so the final sample is exactly
    t_end) or, when t_end is None, until the event function changes sign.
    Returns (times, states, derivatives, terminal_event).
    """
    k = kernel
    a, e = _tableau(k)
    t = k.zero
    y = tuple(k.mpf(v) for v in y0)
    if t_end is not None:
        t_end = k.mpf(t_end)
        if not t_end > 0:
            raise DomainError(f"t_end must be positive, got {t_end}")
    f = field(y)
    times, states, derivs = [t], [y], [f]
    if not _all_finite(y, k, cfg.blowup_threshold):
        raise BlowUpError("initial state is not finite", last_state=y, last_time=t)
    g_prev = event(y) if event is not None else None

    span = (t_end - t) if t_end is not None else None
    h = _initial_step(field, y, f, span, k, cfg)
    hmin_rel = 16 * float(k.eps)
    rejected_last = False

    for step in range(cfg.max_steps):
        if t_end is not None:
            remaining = t_end - t
            last = h >= remaining
            if last:
                h = remaining
        else:
            last = False

        try:
            stages = [f]
            # the last row of _A holds the fifth-order weights, so the final
            # stage is evaluated at y_new and reused as the next first stage
            for i in range(1, 7):
                y_new = tuple(
                    yj + h * sum(a[i][m] * stages[m][j] for m in range(i) if a[i][m] != 0)
                    for j, yj in enumerate(y)
                )
                stages.append(field(y_new))
            err = tuple(h * sum(e[m] * stages[m][j] for m in range(7) if e[m] != 0)
                        for j in range(len(y)))
            err_norm = _error_norm(err, y, y_new, cfg)
            if not (math.isfinite(err_norm) and _all_finite(y_new, k, float("inf"))):
                err_norm = float("inf")
        except (OverflowError, ZeroDivisionError):
            err_norm = float("inf")

        if err_norm <= 1.0:
            t_new = t_end if last else t + h
            f_new = stages[6]
            if not _all_finite(y_new, k, cfg.blowup_threshold):
                raise BlowUpError(f"state left the representable range at t={t_new}",
                                  last_state=y, last_time=t)
            if event is not None:
                g_new = event(y_new)
                if g_prev != 0 and ((g_prev > 0) != (g_new > 0) or g_new == 0):
                    t_star, y_star = _locate_event(event, t, y, f, t_new, y_new, f_new, k, cfg)
                    times.append(t_star)
                    states.append(y_star)
                    derivs.append(field(y_star))
                    logger.debug("event '%s' at t=%s after %d steps", event_description,
                                 t_star, step + 1)
                    return times, states, derivs, TerminalEvent(event_description, t_star)
                g_prev = g_new
            t, y, f = t_new, y_new, f_new
            times.append(t)
            states.append(y)
            derivs.append(f)
            if last:
                return times, states, derivs, None
            factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
            if rejected_last:
                factor = min(factor, 1.0)
            rejected_last = False
        else:
            if math.isinf(err_norm):
                factor = 0.25
            else:
                factor = max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
            rejected_last = True

        h = h * factor
        if cfg.max_step is not None and h > cfg.max_step:
            h = k.mpf(cfg.max_step)
        if abs(h) <= hmin_rel * max(1.0, abs(float(t))):
            raise NonConvergenceError(f"step size underflow at t={t}", last_state=y, last_time=t)

    raise NonConvergenceError(f"max_steps={cfg.max_steps} exhausted at t={t}",
                              last_state=y, last_time=t)


def _locate_event(event, t0, y0, f0, t1, y1, f1, kernel, cfg):
    def g(t):
        return event(_hermite(t0, y0, f0, t1, y1, f1, t))

    g0, g1 = event(y0), event(y1)
    if g1 == 0:
        return t1, y1
    result = brentq(g, t0, t1, xtol=cfg.rel_tol * 1e-3 * max(1.0, abs(float(t1))),
                    rtol=4 * float(kernel.eps), fa=g0, fb=g1)
    t_star = result.root
    if not t_star > t0:
        t_star = t1
    return t_star, _hermite(t0, y0, f0, t1, y1, f1, t_star)


def _trajectory(raw, params, kernel, coordinates, cfg, label="") -> Trajectory:
    times, states, derivs, terminal = raw
    return Trajectory(times=times, states=states, derivatives=derivs, params=params,
                      kernel=kernel, coordinates=coordinates, terminal_event=terminal,
                      dense_output=cfg.dense_output, label=label)


def _resolve_coordinates(p0: PhasePoint, coordinates: Optional[str]) -> str:
    if coordinates is None:
        return CANONICAL if p0.z < 1 else CARTESIAN
    if coordinates not in (CARTESIAN, CANONICAL):
        raise ConfigurationError(f"unknown coordinates {coordinates!r}")
    if coordinates == CANONICAL and not p0.z < 1:
        raise DomainError("canonical coordinates need z < 1")
    return coordinates


def _initial_state(p0: PhasePoint, coordinates: str, kernel: Kernel) -> State:
    p0 = PhasePoint(kernel.mpf(p0.y), kernel.mpf(p0.z))
    if coordinates == CANONICAL:
        return to_canonical(p0, kernel)
    return p0.as_tuple()


def _field(coordinates: str, params: Params, kernel: Kernel):
    if coordinates == CANONICAL:
        return canonical_field(params, kernel)
    return cartesian_field(params, kernel)


def integrate_to_time(p0: PhasePoint, t_end: Any, params: Params,
                      cfg: IntegratorConfig = IntegratorConfig(), kernel: Kernel = MACHINE,
                      coordinates: Optional[str] = None) -> Trajectory:
    """Integrate from p0 at t = 0 to exactly t_end"""
    coordinates = _resolve_coordinates(p0, coordinates)
    raw = dormand_prince(_field(coordinates, params, kernel),
                         _initial_state(p0, coordinates, kernel), t_end, kernel, cfg)
    return _trajectory(raw, params, kernel, coordinates, cfg)


def integrate_canonical(q0: Any, log_gap0: Any, t_end: Any, params: Params,
                        cfg: IntegratorConfig = IntegratorConfig(),
                        kernel: Kernel = MACHINE) -> Trajectory:
    """Integrate from (Q, P) = (q0, log(1 - z0)) given directly"""
    raw = dormand_prince(canonical_field(params, kernel), (q0, log_gap0), t_end, kernel, cfg)
    return _trajectory(raw, params, kernel, CANONICAL, cfg)


def integrate_to_event(p0: PhasePoint, event_y: Any, params: Params,
                       cfg: IntegratorConfig = IntegratorConfig(), kernel: Kernel = MACHINE,
                       coordinates: Optional[str] = None) -> Trajectory:
    """Integrate from p0 until the first crossing of y = event_y"""
    coordinates = _resolve_coordinates(p0, coordinates)
    level = kernel.mpf(event_y)
    try:
        raw = dormand_prince(_field(coordinates, params, kernel),
                             _initial_state(p0, coordinates, kernel), None, kernel, cfg,
                             event=lambda s: s[0] - level,
                             event_description=f"y crosses {kernel.format(level, 12)}")
    except NonConvergenceError as e:
        raise NoCrossingError(f"no crossing of y={event_y} within {cfg.max_steps} steps",
                              last_state=e.last_state, last_time=e.last_time) from e
    return _trajectory(raw, params, kernel, coordinates, cfg)


LEFT = "left"
RIGHT = "right"
NONE = "none"
RETRY_DEGREE = 10


def quad_singular(f: Callable[[Any], Any], a: Any, b: Any, singular_end: str = NONE,
                  tol: float = 1e-13, kernel: Kernel = MACHINE,
                  distance_form: bool = False) -> Any:
    """
    Integral of f over [a, b] with an optional (x - endpoint)^(-1/2) singularity

    For a singular end the substitution x = endpoint +/- u^2 removes the
    singularity and the smooth integrand in u goes to the quadrature rule.
    With distance_form=True, f receives the distance d = |x - endpoint|
    instead of x, which lets callers evaluate differences such as
    F(x) - F(endpoint) without cancellation.
    """
    k = kernel
    a, b = k.mpf(a), k.mpf(b)
    if not b > a:
        raise DomainError(f"quad_singular needs a < b, got [{a}, {b}]")
    if singular_end not in (LEFT, RIGHT, NONE):
        raise ConfigurationError(f"singular_end must be left, right or none, got {singular_end!r}")

    if singular_end == NONE:
        if distance_form:
            def integrand(x):
                return f(x - a)
        else:
            integrand = f
        lo, hi, method = a, b, "tanh-sinh"
    else:
        if singular_end == LEFT:
            def point(u):
                return u * u if distance_form else a + u * u
        else:
            def point(u):
                return u * u if distance_form else b - u * u

        def integrand(u):
            if u == 0:
                # zero weight at the endpoint itself
                return k.zero
            return 2 * u * f(point(u))

        # x-form integrands lose digits next to the endpoint; Gauss-Legendre
        # nodes stay away from it
        lo, hi = k.zero, k.sqrt(b - a)
        method = "tanh-sinh" if distance_form else "gauss-legendre"

    value, error = k.quad(integrand, lo, hi, method=method)
    if not k.isfinite(value) or error > tol:
        logger.debug("quad_singular: error %s above %s, refining", error, tol)
        value, error = k.quad(integrand, lo, hi, method=method, maxdegree=RETRY_DEGREE)
    if not k.isfinite(value) or error > tol:
        raise QuadratureError(f"quadrature error estimate {error} exceeds tolerance {tol}",
                              last_state=(value,))
    logger.debug("quad_singular: value=%s error=%s", value, error)
    return value


def write_trajectory_csv(trajectory: Trajectory, path, metadata: Optional[dict] = None):
    """CSV with columns t, y, z, C^2 at full working precision"""
    k = trajectory.kernel
    c2 = trajectory.conserved_values() if _below_line(trajectory) else [None] * len(trajectory)
    rows = []
    for (t, p), c in zip(trajectory.samples, c2):
        rows.append([k.format(t), k.format(p.y), k.format(p.z),
                     "" if c is None else k.format(c)])
    meta = {"epsilon": trajectory.params.epsilon, "coordinates": trajectory.coordinates,
            "precision": k.digits if k.extended else "machine"}
    if trajectory.label:
        meta["label"] = trajectory.label
    if trajectory.terminal_event is not None:
        meta["terminal_event"] = trajectory.terminal_event.description
    meta.update(metadata or {})
    return write_csv(path, ["t", "y", "z", "C2"], rows, meta)


def _below_line(trajectory: Trajectory) -> bool:
    if trajectory.coordinates == CANONICAL:
        return True
    return all(s[1] < 1 for s in trajectory.states)
