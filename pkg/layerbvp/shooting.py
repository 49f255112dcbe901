"""
Shooting for the boundary value problem

A shot starts at (y, y') = (1, s), runs to x = 1 and reports y(1) + 1. For
s < 1 shots run in canonical coordinates, so M and B1 can be shot directly
in v = log(1 - s): their slopes sit within e^(-c/eps) of 1 and would be
indistinguishable from each other in s.

Branch discovery:
    B0   bracket in s around slope_b0, polished in s
    M    bracket in v around log(slope_tst(M)) +/- log 4, polished in v
    B1   bracket in v around log(slope_tst(B1)) +/- log 4, polished in v

Residual signs by slope: negative below B0, positive between B0 and M,
negative between M and B1, positive above B1 (y(1) = 2 at s = 1).
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .asymptotics import (
    Branch,
    composite,
    composite_eval,
    slope_b0,
    slope_tst,
)
from .dynamics import CRITICAL_EPSILON, Params, PhasePoint, slope_invariant_from_gap
from .errors import (
    BlowUpError,
    BracketError,
    BranchNotFoundError,
    DomainError,
    NonConvergenceError,
)
from .export import write_csv
from .hpreal import MACHINE, Kernel, kernel_for
from .integrate import (
    IntegratorConfig,
    Trajectory,
    integrate_canonical,
    integrate_to_time,
)
from .roots import brentq, sign_changes

logger = logging.getLogger(__name__)

SATURATED_RESIDUAL = 1e3
MAX_EXPANSIONS = 6
FALLBACK_POINTS = 400
ROOT_XTOL = 1e-12
ISOLATE_POINTS = 8

# final solutions are re-integrated with this step cap for smooth dense output
FINAL_MAX_STEP = 0.01


@dataclass(frozen=True)
class ShootResult:
    """One shot from (1, s)"""

    initial_slope: Any
    final_y: Any
    residual: Any
    trajectory: Optional[Trajectory]
    saturated: bool = False
    flagged: bool = False


@dataclass(frozen=True)
class BranchSolution:
    """A solved branch with its exact initial gap 1 - y'(0)"""

    branch: Branch
    initial_slope: Any
    final_slope: Any
    trajectory: Trajectory
    epsilon: float
    initial_gap: Any
    merged: bool = False

    @property
    def final_y(self) -> Any:
        return self.trajectory.final_point.y

    @property
    def residual(self) -> Any:
        return self.final_y + 1

    @property
    def final_gap(self) -> Any:
        return self.trajectory.gap(-1)

    def endpoint_mismatch(self) -> Any:
        """|f(z0) - f(z1)| with f(z) = z + log(1 - z)"""
        k = self.trajectory.kernel
        f0 = slope_invariant_from_gap(self.initial_gap, k)
        f1 = slope_invariant_from_gap(self.final_gap, k)
        return abs(f0 - f1)

    def curve(self, n: int = 1001) -> List[Tuple[Any, Any, Any]]:
        """(x, y, y') on a uniform grid from the dense output"""
        k = self.trajectory.kernel
        rows = []
        for i in range(n):
            x = k.mpf(i) / (n - 1)
            p = self.trajectory.evaluate(x)
            rows.append((x, p.y, p.z))
        return rows


def _default_cfg(cfg: Optional[IntegratorConfig], kernel: Kernel) -> IntegratorConfig:
    return cfg if cfg is not None else IntegratorConfig.for_kernel(kernel)


def _saturated(s: Any, error: Exception, kernel: Kernel, flagged: bool) -> ShootResult:
    state = getattr(error, "last_state", None)
    sign = -1
    if state is not None and kernel.isfinite(state[0]) and state[0] + 1 > 0:
        sign = 1
    logger.debug("shot s=%s saturated (%s)", s, error)
    residual = kernel.mpf(sign * SATURATED_RESIDUAL)
    return ShootResult(s, residual - 1, residual, None, saturated=True, flagged=flagged)


def target(s: Any, params: Params, cfg: Optional[IntegratorConfig] = None,
           kernel: Kernel = MACHINE) -> ShootResult:
    """Shoot from (1, s) to x = 1; s >= 1 is allowed but flagged"""
    k = kernel
    cfg = _default_cfg(cfg, k)
    s = k.mpf(s)
    flagged = not s < 1
    if flagged:
        logger.debug("shot s=%s starts on or above the invariant line", s)
    try:
        traj = integrate_to_time(PhasePoint(k.one, s), 1, params, cfg, k)
    except (BlowUpError, NonConvergenceError) as e:
        return _saturated(s, e, k, flagged)
    final_y = traj.final_point.y
    return ShootResult(s, final_y, final_y + 1, traj, flagged=flagged)


def target_gap(log_gap: Any, params: Params, cfg: Optional[IntegratorConfig] = None,
               kernel: Kernel = MACHINE) -> ShootResult:
    """Shoot with y'(0) = 1 - exp(log_gap), i.e. from P = log_gap in canonical coordinates"""
    k = kernel
    cfg = _default_cfg(cfg, k)
    v = k.mpf(log_gap)
    s = 1 - k.exp(v)
    try:
        traj = integrate_canonical(k.one, v, 1, params, cfg, k)
    except (BlowUpError, NonConvergenceError) as e:
        return _saturated(s, e, k, False)
    final_y = traj.final_point.y
    return ShootResult(s, final_y, final_y + 1, traj)


def _sign(v: Any) -> int:
    return (v > 0) - (v < 0)


def _expand_bracket(res: Callable[[Any], Any], lo: Any, hi: Any, lo_sign: int,
                    step: Any, grow: Any) -> Optional[Tuple[Any, Any, Any, Any]]:
    """Move [lo, hi] until res(lo) has lo_sign and res(hi) the opposite sign"""
    f_lo, f_hi = res(lo), res(hi)
    for _ in range(MAX_EXPANSIONS + 1):
        lo_ok = _sign(f_lo) in (lo_sign, 0)
        hi_ok = _sign(f_hi) in (-lo_sign, 0)
        if lo_ok and hi_ok:
            return lo, hi, f_lo, f_hi
        if hi_ok:
            hi, f_hi = lo, f_lo
            lo = lo - step
            f_lo = res(lo)
        elif lo_ok:
            lo, f_lo = hi, f_hi
            hi = hi + step
            f_hi = res(hi)
        else:
            lo, hi = lo - step, hi + step
            f_lo, f_hi = res(lo), res(hi)
        step = step * grow
    return None


def _isolate(res: Callable[[Any], Any], lo, hi, f_lo, f_hi, pick: str,
             n: int = ISOLATE_POINTS) -> Tuple[Any, Any, Any, Any]:
    """
    Narrow a bracket to one sign change

    Expanded brackets can enclose all three roots; pick chooses the lowest,
    middle or highest crossing among n interior samples. A sample that is
    exactly zero is a crossing of its own and comes back as a zero-width
    bracket.
    """
    xs = [lo + (hi - lo) * i / (n + 1) for i in range(n + 2)]
    values = [f_lo] + [res(x) for x in xs[1:-1]] + [f_hi]
    crossings = []
    for i, v in enumerate(values):
        if _sign(v) == 0:
            crossings.append((i, i))
        elif i + 1 < len(values) and _sign(values[i + 1]) == -_sign(v):
            crossings.append((i, i + 1))
    if not crossings:
        raise BracketError(f"no sign change left in [{lo}, {hi}]")
    if len(crossings) > 1:
        logger.debug("bracket [%s, %s] holds %d crossings", lo, hi, len(crossings))
    if pick == "lowest":
        i, j = crossings[0]
    elif pick == "highest":
        i, j = crossings[-1]
    else:
        i, j = crossings[len(crossings) // 2]
    return xs[i], xs[j], values[i], values[j]


def _polish(res: Callable[[Any], Any], lo, hi, f_lo, f_hi, kernel: Kernel) -> Any:
    result = brentq(res, lo, hi, xtol=ROOT_XTOL, rtol=4 * kernel.eps, fa=f_lo, fb=f_hi)
    logger.debug("root polished to %s in %d iterations", result.root, result.iterations)
    return result.root


def _log_gap_window(params: Params, k: Kernel) -> Tuple[Any, Any]:
    """v-range that contains all three roots whenever they exist"""
    eps = params.eps(k)
    log4 = 2 * k.log(2 * k.one)
    v_min = k.log(slope_tst(Branch.B1, params, "leading", k)) - 2 * log4
    width = max(5 * eps, k.one)
    v_max = k.log(1 - (slope_b0(params, k) - width)) + log4
    return min(v_min, -3 * k.one), v_max


def _scan_log_gap_roots(params: Params, cfg: IntegratorConfig, k: Kernel,
                        n: int = FALLBACK_POINTS) -> List[Tuple[Any, Any, Any, Any]]:
    """Bracketing pairs (v_lo, v_hi, f_lo, f_hi) in increasing v (B1, M, B0 order)"""
    v_min, v_max = _log_gap_window(params, k)
    vs = [v_min + (v_max - v_min) * i / (n - 1) for i in range(n)]
    values = [target_gap(v, params, cfg, k).residual for v in vs]
    return [(vs[i], vs[j], values[i], values[j]) for i, j in sign_changes(values)]


def _finish(branch: Branch, log_gap: Optional[Any], s: Optional[Any], params: Params,
            cfg: IntegratorConfig, k: Kernel, merged: bool = False) -> BranchSolution:
    final_cfg = replace(cfg, dense_output=True,
                        max_step=min(cfg.max_step or FINAL_MAX_STEP, FINAL_MAX_STEP))
    if log_gap is None:
        gap = 1 - s
        if not gap > 0:
            raise BranchNotFoundError(f"{branch.value} root at s={s} is not below the invariant line")
        log_gap = k.log(gap)
    traj = integrate_canonical(k.one, log_gap, 1, params, final_cfg, k)
    traj.label = branch.value
    gap = k.exp(log_gap)
    solution = BranchSolution(branch=branch, initial_slope=1 - gap,
                              final_slope=traj.final_point.z, trajectory=traj,
                              epsilon=params.epsilon, initial_gap=gap, merged=merged)
    logger.info("%s at eps=%s: y'(0)=%s, 1-y'(0)=%s, residual=%s", branch.value,
                params.epsilon, k.format(solution.initial_slope, 12), k.format(gap, 12),
                k.format(solution.residual, 3))
    return solution


def _find_merged(branch: Branch, params: Params, cfg: IntegratorConfig,
                 k: Kernel) -> BranchSolution:
    lo, hi, n = k.mpf(-4), k.mpf("0.95"), 100
    ss = [lo + (hi - lo) * i / (n - 1) for i in range(n)]
    values = [target(s, params, cfg, k).residual for s in ss]
    pairs = sign_changes(values)
    if not pairs:
        raise BranchNotFoundError(f"no solution found for eps={params.epsilon}")
    if len(pairs) > 1:
        logger.warning("%d sign changes above the critical epsilon at eps=%s; using the first",
                       len(pairs), params.epsilon)
    i, j = pairs[0]

    def res(s):
        return target(s, params, cfg, k).residual

    root = _polish(res, ss[i], ss[j], values[i], values[j], k)
    return _finish(branch, None, root, params, cfg, k, merged=True)


def find_branch(branch: Branch, params: Params, cfg: Optional[IntegratorConfig] = None,
                kernel: Kernel = MACHINE) -> BranchSolution:
    """
    Solve the boundary value problem on one branch

    At or above the critical epsilon the single remaining solution is
    returned for every branch tag, marked merged.
    """
    k = kernel
    cfg = _default_cfg(cfg, k)
    if params.epsilon >= CRITICAL_EPSILON:
        return _find_merged(branch, params, cfg, k)

    log4 = 2 * k.log(2 * k.one)
    if branch is Branch.B0:
        def res(s):
            return target(s, params, cfg, k).residual

        centre = slope_b0(params, k)
        width = max(5 * params.eps(k), k.one)
        found = _expand_bracket(res, centre - width, centre + width, -1, width, 2)
        if found is not None:
            root = _polish(res, *_isolate(res, *found, "lowest"), k)
            return _finish(branch, None, root, params, cfg, k)
    else:
        def res(v):
            return target_gap(v, params, cfg, k).residual

        centre = k.log(slope_tst(branch, params, "leading", k))
        lo_sign = 1 if branch is Branch.B1 else -1
        pick = "lowest" if branch is Branch.B1 else "middle"
        found = _expand_bracket(res, centre - log4, centre + log4, lo_sign, log4, 1)
        if found is not None:
            root = _polish(res, *_isolate(res, *found, pick), k)
            return _finish(branch, root, None, params, cfg, k)

    logger.info("bracket around the %s prediction failed at eps=%s; scanning",
                branch.value, params.epsilon)
    pairs = _scan_log_gap_roots(params, cfg, k)
    if len(pairs) != 3:
        raise BranchNotFoundError(
            f"branch {branch.value} not found at eps={params.epsilon}: "
            f"{len(pairs)} sign change(s) in the slope scan"
        )
    index = {Branch.B1: 0, Branch.M: 1, Branch.B0: 2}[branch]
    v_lo, v_hi, f_lo, f_hi = pairs[index]

    def res_v(v):
        return target_gap(v, params, cfg, k).residual

    try:
        root = _polish(res_v, v_lo, v_hi, f_lo, f_hi, k)
    except BracketError as e:
        raise BranchNotFoundError(str(e)) from e
    return _finish(branch, root, None, params, cfg, k)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def parallel_map(func: Callable, items: Iterable, workers: int = 1) -> list:
    """map() over worker processes, results in input order"""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _scan_task(args):
    s_text, epsilon, cfg, digits = args
    k = kernel_for(digits)
    result = target(k.mpf(s_text), Params(epsilon), cfg, k)
    return k.format(result.residual)


def scan_target(params: Params, s_range: Tuple[Any, Any], n: int,
                cfg: Optional[IntegratorConfig] = None, kernel: Kernel = MACHINE,
                workers: int = 1) -> List[Tuple[Any, Any]]:
    """(s, y(1) + 1) on n uniformly spaced slopes"""
    if n < 2:
        raise DomainError(f"scan needs at least 2 points, got {n}")
    k = kernel
    cfg = _default_cfg(cfg, k)
    lo, hi = k.mpf(s_range[0]), k.mpf(s_range[1])
    if not hi > lo:
        raise DomainError(f"empty slope range [{lo}, {hi}]")
    ss = [lo + (hi - lo) * i / (n - 1) for i in range(n)]
    tasks = [(k.format(s), params.epsilon, cfg, k.precision_digits) for s in ss]
    residuals = parallel_map(_scan_task, tasks, workers)
    return [(s, k.mpf(r)) for s, r in zip(ss, residuals)]


@dataclass(frozen=True)
class SlopeRecord:
    """Numeric initial slope of one branch next to its asymptotic prediction"""

    epsilon: float
    branch: Branch
    slope: Any
    gap: Any
    predicted: Any
    ratio: Any


def _slope_task(args):
    epsilon, digits, cfg = args
    k = kernel_for(digits)
    params = Params(epsilon)
    out = []
    for branch in (Branch.B0, Branch.M, Branch.B1):
        sol = find_branch(branch, params, cfg, k)
        out.append((branch.value, k.format(sol.initial_slope), k.format(sol.initial_gap)))
    return out


def slope_sweep(epsilons: Sequence[float], kernel: Kernel = MACHINE,
                cfg: Optional[IntegratorConfig] = None, workers: int = 1) -> List[SlopeRecord]:
    """
    Initial slopes of all three branches for each epsilon

    ratio is slope/slope_b0 for B0 and (1 - y'(0))/slope_tst for M and B1.
    """
    k = kernel
    cfg = _default_cfg(cfg, k)
    tasks = [(float(eps), k.precision_digits, cfg) for eps in epsilons]
    records = []
    for eps, rows in zip(epsilons, parallel_map(_slope_task, tasks, workers)):
        params = Params(float(eps))
        for name, slope_text, gap_text in rows:
            branch = Branch.parse(name)
            slope, gap = k.mpf(slope_text), k.mpf(gap_text)
            if branch is Branch.B0:
                predicted = slope_b0(params, k)
                ratio = slope / predicted
            else:
                predicted = slope_tst(branch, params, "leading", k)
                ratio = gap / predicted
            records.append(SlopeRecord(float(eps), branch, slope, gap, predicted, ratio))
    return records


def composite_error(branch: Branch, order: int, params: Params,
                    cfg: Optional[IntegratorConfig] = None, kernel: Kernel = MACHINE,
                    n: int = 1001,
                    solution: Optional[BranchSolution] = None) -> Tuple[Any, List[Tuple[Any, Any]]]:
    """max |composite - numerical| over n >= 1000 grid points, and the profile"""
    if n < 2:
        raise DomainError(f"need at least 2 grid points, got {n}")
    k = kernel
    if solution is None:
        solution = find_branch(branch, params, cfg, k)
    cs = composite(branch, order, params, k)
    profile = []
    for x, y_num, _ in solution.curve(n):
        y_c, _ = composite_eval(cs, x)
        profile.append((x, y_c - y_num))
    max_error = max(abs(e) for _, e in profile)
    logger.info("%s order %d composite error at eps=%s: %s", branch.value, order,
                params.epsilon, k.format(max_error, 6))
    return max_error, profile


@dataclass(frozen=True)
class ErrorScaling:
    """
    Composite error against eps over a halving sequence

    local_exponent comes from the two smallest eps; fitted_exponent is the
    least-squares slope of log(error) on log(eps) over the whole sequence.
    """

    branch: Branch
    order: int
    epsilons: Tuple[float, ...]
    errors: Tuple[float, ...]
    local_exponent: float
    fitted_exponent: float

    @property
    def scaled(self) -> Tuple[float, ...]:
        """error / eps^2 per eps"""
        return tuple(e / eps ** 2 for eps, e in zip(self.epsilons, self.errors))


def composite_error_scaling(branch: Branch, order: int,
                            epsilons: Sequence[float] = (0.1, 0.05, 0.025),
                            cfg: Optional[IntegratorConfig] = None) -> ErrorScaling:
    """Machine-precision composite errors at each eps and their power law"""
    epsilons = tuple(sorted((float(e) for e in epsilons), reverse=True))
    if len(epsilons) < 2 or epsilons[-1] == epsilons[-2]:
        raise DomainError(f"need at least two distinct epsilons, got {epsilons}")
    errors = tuple(float(composite_error(branch, order, Params(eps), cfg)[0])
                   for eps in epsilons)
    local = math.log(errors[-2] / errors[-1]) / math.log(epsilons[-2] / epsilons[-1])
    fitted, _ = np.polyfit(np.log(epsilons), np.log(errors), 1)
    logger.info("%s order %d error exponents: local %.4f, fitted %.4f", branch.value, order,
                local, fitted)
    return ErrorScaling(branch, order, epsilons, errors, local, float(fitted))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _meta(solution: BranchSolution, extra: Optional[dict]) -> dict:
    k = solution.trajectory.kernel
    meta = {"branch": solution.branch.value, "epsilon": solution.epsilon,
            "initial_slope": k.format(solution.initial_slope),
            "initial_gap": k.format(solution.initial_gap),
            "merged": solution.merged,
            "precision": k.digits if k.extended else "machine"}
    meta.update(extra or {})
    return meta


def write_solution_csv(solution: BranchSolution, path, n: int = 1001,
                       metadata: Optional[dict] = None):
    k = solution.trajectory.kernel
    rows = [[k.format(x), k.format(y), k.format(z)] for x, y, z in solution.curve(n)]
    return write_csv(path, ["x", "y", "z"], rows, _meta(solution, metadata))


def write_phase_plane_csv(solution: BranchSolution, path, metadata: Optional[dict] = None):
    """Sampled (y, z) of the solution trajectory"""
    k = solution.trajectory.kernel
    rows = [[k.format(p.y), k.format(p.z)] for p in solution.trajectory.points()]
    meta = _meta(solution, metadata)
    meta["coordinates"] = solution.trajectory.coordinates
    return write_csv(path, ["y", "z"], rows, meta)


def write_scan_csv(rows: Sequence[Tuple[Any, Any]], path, kernel: Kernel = MACHINE,
                   metadata: Optional[dict] = None):
    data = [[kernel.format(s), kernel.format(r)] for s, r in rows]
    return write_csv(path, ["s", "residual"], data, metadata)


def write_error_csv(profile: Sequence[Tuple[Any, Any]], path, kernel: Kernel = MACHINE,
                    metadata: Optional[dict] = None):
    """Composite minus numerical solution: columns x, error"""
    data = [[kernel.format(x), kernel.format(e)] for x, e in profile]
    meta = dict(metadata or {})
    if profile:
        meta.setdefault("max_abs_error", kernel.format(max(abs(e) for _, e in profile)))
    return write_csv(path, ["x", "error"], data, meta)


def write_slopes_csv(records: Sequence[SlopeRecord], path, kernel: Kernel = MACHINE,
                     metadata: Optional[dict] = None):
    k = kernel
    data = [[repr(r.epsilon), r.branch.value, k.format(r.slope), k.format(r.gap),
             k.format(r.predicted), k.format(r.ratio)] for r in records]
    header = ["epsilon", "branch", "slope", "gap", "predicted", "ratio"]
    return write_csv(path, header, data, metadata)


