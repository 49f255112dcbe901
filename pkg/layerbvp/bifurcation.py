"""
The pitchfork at the critical epsilon

At the critical parameter the three solutions merge into the self-symmetric
trajectory through (1, 0) and (0, z_c), on which C^2 = 1. Two conditions fix
the pair (z_c, eps_c):

    2 eps_c [z_c + log(1 - z_c)] = -1            (the trajectory has C^2 = 1)
    travel time from (1, 0) to (0, z_c) = 1/2    (half of the unit interval)

Eliminating eps_c leaves one equation g(z_c) = 0, solved with brentq on top
of quad_singular. Around the critical point the shooting residual behaves
like A s^3 + B (eps - eps_c) s, which residual_grid and fit_pitchfork
measure.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import CRITICAL_EPSILON, Params, PhasePoint, slope_invariant
from .errors import BracketError, DomainError, FitError
from .export import write_csv
from .hpreal import MACHINE, Kernel, kernel_for
from .integrate import LEFT, IntegratorConfig, integrate_to_time, quad_singular
from .roots import brentq, sign_changes
from .shooting import parallel_map, scan_target, target

logger = logging.getLogger(__name__)

G_BRACKET = (-20.0, -0.5)
QUAD_TOL = 1e-13
MAX_CONDITION = 1e12

# default slope window and spacing for root counting
ROOT_SCAN_RANGE = (-1.5, 0.95)
ROOT_SCAN_STEP = 0.005

SEPARATION_DELTAS = (2.5e-4, 5e-4, 1e-3, 2e-3)

# the two panels of the pitchfork figure
COARSE_WINDOW = ((0.19, 0.24), (-1.5, 0.95))
FINE_HALF_WIDTH = 2e-6
FINE_SLOPES = (-0.05, 0.05)


@dataclass(frozen=True)
class CriticalPoint:
    """The merger point and the result of integrating through it"""

    z_c: Any
    epsilon_c: Any
    final_y: Optional[Any] = None
    final_z: Optional[Any] = None
    travel_time: Optional[Any] = None

    def payload(self, kernel: Kernel = MACHINE) -> Dict[str, Any]:
        """Decimal strings for JSON export"""
        out = {"z_c": kernel.format(self.z_c), "epsilon_c": kernel.format(self.epsilon_c)}
        if self.final_y is not None:
            out["cross_check_final_y"] = kernel.format(self.final_y)
            out["cross_check_final_z"] = kernel.format(self.final_z)
        if self.travel_time is not None:
            out["travel_time"] = kernel.format(self.travel_time)
        return out


@dataclass(frozen=True)
class PitchforkFit:
    """Least-squares cubic normal form of the residual near the critical point"""

    A: float
    B: float
    epsilon_c_fit: float
    coefficients: Dict[str, float] = field(default_factory=dict)
    rms: float = 0.0
    condition: float = 0.0


def eps_from_zc(z_c: Any, kernel: Kernel = MACHINE) -> Any:
    """eps_c = -1 / (2 [z_c + log(1 - z_c)])"""
    k = kernel
    z_c = k.mpf(z_c)
    if not z_c < 0:
        raise DomainError(f"z_c must be negative, got {z_c}")
    return -1 / (2 * slope_invariant(z_c, k))


def _excess(d: Any, z_c: Any, k: Kernel) -> Any:
    """f(z_c + d) - f(z_c) >= 0, written without cancellation at small d"""
    return d + k.log1p(-d / (1 - z_c))


def travel_integrand(d: Any, z_c: Any, kernel: Kernel = MACHINE) -> Any:
    """
    Integrand of the combined condition at z = z_c + d

    1 / ((1 - z) sqrt(1 - f(z)/f(z_c))), equal to 1 at z = 0.
    """
    k = kernel
    f_c = slope_invariant(z_c, k)
    return 1 / ((1 - z_c - d) * k.sqrt(-_excess(d, z_c, k) / f_c))


def g(z_c: Any, kernel: Kernel = MACHINE, tol: float = QUAD_TOL) -> Any:
    """f(z_c) + integral from z_c to 0 of travel_integrand"""
    k = kernel
    z_c = k.mpf(z_c)
    if not z_c < 0:
        raise DomainError(f"z_c must be negative, got {z_c}")
    integral = quad_singular(lambda d: travel_integrand(d, z_c, k), z_c, k.zero, LEFT,
                             tol, k, distance_form=True)
    return slope_invariant(z_c, k) + integral


def travel_time(z_c: Any, epsilon: Any, kernel: Kernel = MACHINE, tol: float = QUAD_TOL) -> Any:
    """
    Time from (1, 0) to (0, z_c) along the trajectory with C^2 = 1, eps kept explicit

    Equals 1/2 at the critical pair. Requires 1 + 2 eps f(z_c) >= 0, i.e. the
    C^2 = 1 trajectory reaches z_c.
    """
    k = kernel
    z_c, eps = k.mpf(z_c), k.mpf(epsilon)
    if not z_c < 0:
        raise DomainError(f"z_c must be negative, got {z_c}")
    base = 1 + 2 * eps * slope_invariant(z_c, k)
    if base < -8 * k.eps:
        raise DomainError(f"trajectory with C^2 = 1 does not reach z = {z_c} at eps = {eps}")
    base = max(base, k.zero)

    def integrand(d):
        return eps / ((1 - z_c - d) * k.sqrt(base + 2 * eps * _excess(d, z_c, k)))

    return quad_singular(integrand, z_c, k.zero, LEFT, tol, k, distance_form=True)


def locate_critical(kernel: Kernel = MACHINE, bracket: Tuple[float, float] = G_BRACKET,
                    xtol: float = 1e-12, cfg: Optional[IntegratorConfig] = None) -> CriticalPoint:
    """
    Root of g on the bracket, eps_c from it, and the cross-check run

    The cross-check integrates from (1, 0) at eps_c to x = 1, where the
    trajectory should arrive at (-1, 0).
    """
    k = kernel
    try:
        result = brentq(lambda z: g(z, k), k.mpf(bracket[0]), k.mpf(bracket[1]), xtol=xtol,
                        rtol=4 * k.eps)
    except BracketError as e:
        raise BracketError(f"g has no sign change on {bracket}; check the quadrature") from e
    z_c = result.root
    eps_c = eps_from_zc(z_c, k)
    logger.info("critical point: z_c=%s eps_c=%s (%d iterations)", k.format(z_c, 14),
                k.format(eps_c, 14), result.iterations)

    cfg = cfg or IntegratorConfig.for_kernel(k, rel_tol=1e-12, abs_tol=1e-14)
    traj = integrate_to_time(PhasePoint(k.one, k.zero), 1, Params(eps_c), cfg, k)
    final = traj.final_point
    time = travel_time(z_c, eps_c, k)
    if abs(final.y + 1) > 1e-6 or abs(final.z) > 1e-5:
        logger.warning("critical trajectory misses (-1, 0): final state (%s, %s)",
                       k.format(final.y, 10), k.format(final.z, 10))
    return CriticalPoint(z_c, eps_c, final.y, final.z, time)


# ---------------------------------------------------------------------------
# residual grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualGrid:
    """y(1) + 1 on an (eps, s) grid, residuals[i][j] at epsilons[i], slopes[j]"""

    epsilons: List[Any]
    slopes: List[Any]
    residuals: List[List[Any]]

    def rows(self) -> List[Tuple[Any, Any, Any]]:
        """(eps, s, residual) ordered by eps, then s"""
        return [(e, s, r) for e, row in zip(self.epsilons, self.residuals)
                for s, r in zip(self.slopes, row)]

    def sign_change_counts(self) -> List[int]:
        return [len(sign_changes(row)) for row in self.residuals]


def _linspace(lo: Any, hi: Any, n: int, k: Kernel) -> List[Any]:
    lo, hi = k.mpf(lo), k.mpf(hi)
    if n == 1:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _grid_row_task(args):
    epsilon_text, slopes_text, cfg, digits = args
    k = kernel_for(digits)
    params = Params(float(epsilon_text))
    return [k.format(target(k.mpf(s), params, cfg, k).residual) for s in slopes_text]


def residual_grid(eps_range: Tuple[Any, Any], slope_range: Tuple[Any, Any], n_eps: int,
                  n_slope: int, cfg: Optional[IntegratorConfig] = None,
                  kernel: Kernel = MACHINE, workers: int = 1) -> ResidualGrid:
    """Target residuals on a uniform grid; rows are evaluated in parallel"""
    if n_eps < 2 or n_slope < 2:
        raise DomainError(f"grid needs at least 2 points per axis, got {n_eps} x {n_slope}")
    k = kernel
    cfg = cfg or IntegratorConfig.for_kernel(k)
    epsilons = _linspace(eps_range[0], eps_range[1], n_eps, k)
    slopes = _linspace(slope_range[0], slope_range[1], n_slope, k)
    slopes_text = [k.format(s) for s in slopes]
    tasks = [(k.format(e), slopes_text, cfg, k.precision_digits) for e in epsilons]
    rows = parallel_map(_grid_row_task, tasks, workers)
    residuals = [[k.mpf(r) for r in row] for row in rows]
    logger.info("residual grid %d x %d done", n_eps, n_slope)
    return ResidualGrid(epsilons, slopes, residuals)


def grid_window(name: str, epsilon_c: Optional[float] = None) -> Tuple[Tuple[float, float],
                                                                        Tuple[float, float]]:
    """(eps_range, slope_range) of the coarse or fine panel"""
    if name == "coarse":
        return COARSE_WINDOW
    if name == "fine":
        centre = CRITICAL_EPSILON if epsilon_c is None else float(epsilon_c)
        return (centre - FINE_HALF_WIDTH, centre + FINE_HALF_WIDTH), FINE_SLOPES
    raise DomainError(f"window must be 'coarse' or 'fine', got {name!r}")


def write_grid_csv(grid: ResidualGrid, path, kernel: Kernel = MACHINE,
                   metadata: Optional[dict] = None):
    k = kernel
    rows = [[k.format(e), k.format(s), k.format(r)] for e, s, r in grid.rows()]
    meta = {"n_eps": len(grid.epsilons), "n_slope": len(grid.slopes)}
    meta.update(metadata or {})
    return write_csv(path, ["epsilon", "slope", "residual"], rows, meta)


# ---------------------------------------------------------------------------
# roots near the pitchfork
# ---------------------------------------------------------------------------

def pitchfork_roots(epsilon: float, s_range: Tuple[float, float] = ROOT_SCAN_RANGE,
                    step: float = ROOT_SCAN_STEP, cfg: Optional[IntegratorConfig] = None,
                    kernel: Kernel = MACHINE, workers: int = 1) -> List[Any]:
    """Polished target roots in s, in increasing order, from a uniform scan"""
    k = kernel
    cfg = cfg or IntegratorConfig.for_kernel(k)
    n = int(round((s_range[1] - s_range[0]) / step)) + 1
    params = Params(float(epsilon))
    scan = scan_target(params, s_range, n, cfg, k, workers)
    slopes = [s for s, _ in scan]
    values = [r for _, r in scan]
    roots = []
    for i, j in sign_changes(values):
        result = brentq(lambda s: target(s, params, cfg, k).residual, slopes[i], slopes[j],
                        xtol=1e-13, rtol=4 * k.eps, fa=values[i], fb=values[j])
        roots.append(result.root)
    logger.debug("eps=%s: %d roots %s", epsilon, len(roots), roots)
    return roots


def count_roots(epsilon: float, **kwargs) -> int:
    """Number of solutions found by the scan at this epsilon"""
    return len(pitchfork_roots(epsilon, **kwargs))


def separation_exponent(epsilon_c: float, deltas: Sequence[float] = SEPARATION_DELTAS,
                        **kwargs) -> Tuple[float, List[Tuple[float, float]]]:
    """
    Exponent p of (outer-root separation) ~ (eps_c - eps)^p

    Returns p and the (delta, separation) pairs it was fitted to.
    """
    samples = []
    for delta in deltas:
        roots = pitchfork_roots(float(epsilon_c) - delta, **kwargs)
        if len(roots) != 3:
            raise FitError(f"expected 3 roots at eps_c - {delta}, found {len(roots)}")
        samples.append((delta, float(roots[-1] - roots[0])))
    logs = np.log(np.array(samples, dtype=float))
    slope, _ = np.polyfit(logs[:, 0], logs[:, 1], 1)
    logger.info("outer-root separation exponent %.4f", slope)
    return float(slope), samples


FIT_TERMS = ("s3", "s", "de_s", "1", "de", "s2")


def fit_pitchfork(grid: ResidualGrid, epsilon_c: float) -> PitchforkFit:
    """
    Fit residual ~ A s^3 + (beta + B (eps - eps_c)) s + nuisance terms

    The nuisance terms (constant, eps - eps_c, s^2) absorb the asymmetry of
    the window. The fitted linear coefficient vanishes at
    eps_c_fit = eps_c - beta / B.
    """
    rows = grid.rows()
    if len(rows) < len(FIT_TERMS):
        raise FitError(f"need at least {len(FIT_TERMS)} grid points, got {len(rows)}")
    data = np.array([[float(e), float(s), float(r)] for e, s, r in rows])
    de = data[:, 0] - float(epsilon_c)
    s = data[:, 1]
    r = data[:, 2]
    design = np.column_stack([s ** 3, s, de * s, np.ones_like(s), de, s ** 2])
    scale = np.abs(design).max(axis=0)
    if np.any(scale == 0):
        raise FitError("degenerate fit window: a model column vanishes")
    scaled = design / scale
    condition = float(np.linalg.cond(scaled))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise FitError(f"ill-conditioned pitchfork fit (condition number {condition:.3g})")
    coef, _, _, _ = np.linalg.lstsq(scaled, r, rcond=None)
    coef = coef / scale
    fitted = design @ coef
    rms = float(np.sqrt(np.mean((fitted - r) ** 2)))
    A, beta, B = float(coef[0]), float(coef[1]), float(coef[2])
    if B == 0:
        raise FitError("fitted B vanishes")
    eps_fit = float(epsilon_c) - beta / B
    logger.info("pitchfork fit: A=%.6g B=%.6g eps_c_fit=%.12g rms=%.3g", A, B, eps_fit, rms)
    return PitchforkFit(A, B, eps_fit, dict(zip(FIT_TERMS, map(float, coef))), rms, condition)
