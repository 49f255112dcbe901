"""
Self-checks behind ``layerbvp verify``

Each check measures one quantity and compares it with a tolerance:

    fast   machine precision, well under a minute
    full   fast + 50-digit transcendentally-small-term sweeps, the B0 slope
           error scaling, the composite error exponent and the pitchfork
           root counts

``perturb_c1`` shifts the M constant c1 before the tail-matching check; any
nonzero shift must make that check fail.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .asymptotics import (
    Branch,
    b0_constants,
    b0_constants_from_conditions,
    composite,
    composite_eval,
    m_constants,
    m_constants_from_conditions,
    m_inner_order1,
    m_tail_offset,
    naive_slope_diagnostic,
)
from .bifurcation import count_roots, locate_critical, separation_exponent
from .dynamics import CRITICAL_EPSILON, CRITICAL_Z, Params
from .errors import ConfigurationError, LayerBVPError
from .hpreal import MACHINE, Kernel, extended
from .integrate import IntegratorConfig
from .shooting import BranchSolution, composite_error_scaling, find_branch, slope_sweep
from .special import WBranch, dilog, lambert_w

logger = logging.getLogger(__name__)

SUITES = ("fast", "full")

CHECK_EPSILON = 0.1
TST_EPSILONS = (0.1, 0.08, 0.06, 0.05, 0.04)
COMPOSITE_EPSILONS = (0.1, 0.05, 0.025)
TRAP_EPSILON = 0.05
PITCHFORK_OFFSET = 1e-3

LAMBERT_SAMPLES = 10_000
LAMBERT_SEED = 20240229
DILOG_POINTS = 41
TAIL_CHECK_X = 30


@dataclass(frozen=True)
class Check:
    """One named measurement and its pass criterion"""

    name: str
    measured: Any
    tolerance: Any
    passed: bool
    detail: str = ""

    def row(self) -> List[str]:
        return [self.name, _text(self.measured), _text(self.tolerance),
                "PASS" if self.passed else "FAIL"]


@dataclass
class VerifyReport:
    suite: str
    perturb_c1: float = 0.0
    checks: List[Check] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def payload(self) -> Dict[str, Any]:
        return {
            "suite": self.suite,
            "perturb_c1": self.perturb_c1,
            "passed": self.passed,
            "checks": [{"name": c.name, "measured": _text(c.measured),
                        "tolerance": _text(c.tolerance), "passed": c.passed,
                        "detail": c.detail} for c in self.checks],
        }


def _text(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_text(v) for v in value) + "]"
    try:
        return f"{float(value):.6g}"
    except (TypeError, ValueError):
        return str(value)


def _within(name: str, measured: Any, tolerance: float, detail: str = "") -> Check:
    value = float(measured)
    return Check(name, value, tolerance, bool(abs(value) <= tolerance), detail)


def _in_band(name: str, measured: Any, lo: float, hi: float, detail: str = "") -> Check:
    value = float(measured)
    return Check(name, value, f"[{lo:g}, {hi:g}]", bool(lo <= value <= hi), detail)


# ---------------------------------------------------------------------------
# fast checks
# ---------------------------------------------------------------------------

def check_critical_point(kernel: Kernel = MACHINE) -> List[Check]:
    point = locate_critical(kernel)
    return [
        _within("critical eps_c", point.epsilon_c - CRITICAL_EPSILON, 1e-9),
        _within("critical z_c", point.z_c - CRITICAL_Z, 1e-8),
        _within("critical travel time", point.travel_time - kernel.one / 2, 1e-8),
    ]


def solve_all(params: Params, cfg: IntegratorConfig,
              kernel: Kernel = MACHINE) -> Dict[Branch, BranchSolution]:
    return {b: find_branch(b, params, cfg, kernel) for b in Branch}


def check_branch_slopes(solutions: Dict[Branch, BranchSolution]) -> List[Check]:
    b0 = solutions[Branch.B0].initial_slope
    b1 = solutions[Branch.B1].initial_slope
    return [
        _within("B0 slope at eps=0.1 vs -10.6942", b0 + 10.6942, 5e-4),
        _within("B1 slope at eps=0.1 vs 0.9999", b1 - 0.9999, 5e-5),
    ]


def check_endpoint_relation(solutions: Dict[Branch, BranchSolution]) -> List[Check]:
    return [_within(f"endpoint relation {b.value}", sol.endpoint_mismatch(), 1e-8)
            for b, sol in solutions.items()]


def check_conserved_drift(solutions: Dict[Branch, BranchSolution]) -> List[Check]:
    return [_within(f"C^2 drift {b.value}", sol.trajectory.max_conserved_drift(), 1e-9)
            for b, sol in solutions.items()]


def check_curve_symmetry(solutions: Dict[Branch, BranchSolution], n: int = 201) -> Check:
    b0 = solutions[Branch.B0].trajectory
    b1 = solutions[Branch.B1].trajectory
    k = b0.kernel
    worst = k.zero
    for i in range(n):
        x = k.mpf(i) / (n - 1)
        worst = max(worst, abs(b1.evaluate(x).y + b0.evaluate(1 - x).y))
    return _within("y_B1(x) + y_B0(1-x)", worst, 1e-8)


def check_lambert(n: int = LAMBERT_SAMPLES, seed: int = LAMBERT_SEED) -> List[Check]:
    rng = np.random.default_rng(seed)
    branch_point = -np.exp(-1.0)
    principal = np.concatenate([
        rng.uniform(branch_point, 1.0, n // 2),
        np.exp(rng.uniform(0.0, 20.0, n - n // 2)),
    ])
    lower = -np.exp(rng.uniform(-20.0, -1.0, n))
    checks = []
    for branch, xs in ((WBranch.PRINCIPAL, principal), (WBranch.LOWER, lower)):
        worst = 0.0
        for x in xs:
            x = max(float(x), branch_point)
            if x == 0.0:
                continue
            w = lambert_w(x, branch)
            worst = max(worst, abs(w * np.exp(w) - x) / abs(x))
        checks.append(_within(f"Lambert W{branch.value} residual", worst, 1e-14,
                              f"{len(xs)} samples"))
    return checks


def dilog_oracle(x: float, digits: int = 30) -> float:
    """-integral_0^x log(1 - t)/t dt at extended precision"""
    k = extended(digits)
    if x == 0:
        return 0.0

    def integrand(t):
        return -k.log1p(-t) / t if t != 0 else k.one

    value, _ = k.quad(integrand, 0, x)
    return float(value)


def check_dilog(points: int = DILOG_POINTS) -> Check:
    worst = 0.0
    for x in np.linspace(-5.0, 0.9, points):
        worst = max(worst, abs(dilog(float(x)) - dilog_oracle(float(x))))
    return _within("dilog vs integral on [-5, 0.9]", worst, 1e-12, f"{points} points")


def check_constants(perturb_c1: float = 0.0) -> List[Check]:
    k = extended(40)
    c1_b0, c2_b0 = b0_constants(MACHINE)
    d1, d2 = b0_constants_from_conditions(MACHINE)
    c1_m, c2_m = m_constants(k)
    e1, e2 = m_constants_from_conditions(k)
    c1_m = c1_m + k.mpf(perturb_c1)
    y1_zero, _ = m_inner_order1(k.zero, c1_m, c2_m, k)
    X = k.mpf(TAIL_CHECK_X)
    y1_tail, _ = m_inner_order1(X, c1_m, c2_m, k)
    return [
        _within("c2 B0 vs 2.594", c2_b0 - 2.594, 5e-4),
        _within("B0 constants from conditions", max(abs(c1_b0 - d1), abs(c2_b0 - d2)), 1e-13),
        _within("M constants from conditions", max(abs(c1_m - k.mpf(perturb_c1) - e1),
                                                   abs(c2_m - e2)), 1e-30),
        _within("Y1_M(0)", y1_zero, 1e-30),
        _within(f"Y1_M({TAIL_CHECK_X}) - {TAIL_CHECK_X} (tail matching)", y1_tail - X, 1e-15),
        _within("M tail offset", m_tail_offset(c1_m, k), 1e-30),
    ]


def check_composite_symmetry(params: Params, n: int = 201) -> List[Check]:
    k = MACHINE
    checks = []
    for order in (0, 1):
        b0 = composite(Branch.B0, order, params, k)
        b1 = composite(Branch.B1, order, params, k)
        worst = 0.0
        for i in range(n):
            x = i / (n - 1)
            worst = max(worst, abs(composite_eval(b1, x)[0] + composite_eval(b0, 1 - x)[0]))
        checks.append(_within(f"composite symmetry order {order}", worst, 1e-12))
    return checks


def check_naive_trap(epsilon: float = TRAP_EPSILON) -> Check:
    diag = naive_slope_diagnostic(Params(epsilon))
    ratio = float(diag.ratio)
    return Check("naive M gap / transfer gap (must leave [0.5, 2])", ratio, "outside [0.5, 2]",
                 not 0.5 <= ratio <= 2.0)


# ---------------------------------------------------------------------------
# full checks
# ---------------------------------------------------------------------------

def check_tst(workers: int = 1, digits: int = 50,
              epsilons: Sequence[float] = TST_EPSILONS) -> List[Check]:
    k = extended(digits)
    records = slope_sweep(epsilons, k, workers=workers)
    checks = []
    gaps = []
    for branch in (Branch.B1, Branch.M):
        rows = sorted((r for r in records if r.branch is branch), key=lambda r: -r.epsilon)
        deviations = []
        for r in rows:
            deviation = float(abs(r.ratio - 1))
            deviations.append(deviation)
            gaps.append(float(r.gap))
            checks.append(_in_band(f"TST ratio {branch.value} eps={r.epsilon:g}", r.ratio,
                                   1 - 5 * r.epsilon, 1 + 5 * r.epsilon))
        monotone = all(b < a for a, b in zip(deviations, deviations[1:]))
        checks.append(Check(f"TST |ratio - 1| decreasing with eps ({branch.value})",
                            deviations, "decreasing", monotone))
    span = float(np.log10(max(gaps)) - np.log10(min(gaps)))
    checks.append(Check("TST gap span (decades)", span, ">= 10", span >= 10))

    b0 = {r.epsilon: r for r in records if r.branch is Branch.B0}
    if 0.1 in b0 and 0.05 in b0:
        gap_1 = abs(b0[0.1].slope - b0[0.1].predicted)
        gap_2 = abs(b0[0.05].slope - b0[0.05].predicted)
        checks.append(_in_band("B0 slope error ratio eps 0.1 -> 0.05", gap_1 / gap_2, 1.6, 2.6))
    return checks


def check_composite_exponent(epsilons: Sequence[float] = COMPOSITE_EPSILONS) -> List[Check]:
    """
    First-order composite error ~ eps^2 for B0 and M

    The exponent is read from the finest halving; the whole-sequence fit
    still carries the O(eps^3 log eps) term at eps = 0.1 and goes in the
    detail.
    """
    b0 = composite_error_scaling(Branch.B0, 1, epsilons)
    m = composite_error_scaling(Branch.M, 1, epsilons)
    spread = max(b0.scaled) / min(b0.scaled)

    def detail(scaling):
        return (f"errors {list(scaling.errors)}, "
                f"whole-sequence fit {scaling.fitted_exponent:.4f}")

    return [
        _in_band("B0 first-order composite error exponent", b0.local_exponent, 1.8, 2.2,
                 detail(b0)),
        Check("B0 first-order error / eps^2 spread", spread, "<= 2", bool(spread <= 2),
              f"error / eps^2 {list(b0.scaled)}"),
        Check("M first-order composite error exponent", m.local_exponent, ">= 1.8",
              bool(m.local_exponent >= 1.8), detail(m)),
    ]


def check_pitchfork(epsilon_c: float, workers: int = 1) -> List[Check]:
    below = count_roots(epsilon_c - PITCHFORK_OFFSET, workers=workers)
    above = count_roots(epsilon_c + PITCHFORK_OFFSET, workers=workers)
    p, _ = separation_exponent(epsilon_c, workers=workers)
    return [
        Check("roots at eps_c - 1e-3", below, 3, below == 3),
        Check("roots at eps_c + 1e-3", above, 1, above == 1),
        _in_band("outer-root separation exponent", p, 0.4, 0.6),
    ]


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def _guarded(name: str, func: Callable[[], Any]) -> List[Check]:
    """Run a check group; a numerical failure becomes a failed check"""
    try:
        result = func()
    except LayerBVPError as e:
        logger.warning("check %s raised %s", name, e)
        return [Check(name, type(e).__name__, "-", False, str(e))]
    return result if isinstance(result, list) else [result]


def run_suite(suite: str = "fast", perturb_c1: float = 0.0, workers: int = 1,
              progress: Optional[Callable[[Check], None]] = None) -> VerifyReport:
    """Run every check of a suite and collect the results"""
    if suite not in SUITES:
        raise ConfigurationError(f"suite must be one of {SUITES}, got {suite!r}")
    start = time.perf_counter()
    report = VerifyReport(suite, perturb_c1)
    params = Params(CHECK_EPSILON)
    tight = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    solutions: Dict[Branch, BranchSolution] = {}

    def solved():
        if not solutions:
            solutions.update(solve_all(params, tight))
        return solutions

    groups = [
        ("critical point", check_critical_point),
        ("branch slopes", lambda: check_branch_slopes(solved())),
        ("endpoint relation", lambda: check_endpoint_relation(solved())),
        ("conserved drift", lambda: check_conserved_drift(solved())),
        ("curve symmetry", lambda: check_curve_symmetry(solved())),
        ("lambert", check_lambert),
        ("dilog", check_dilog),
        ("constants", lambda: check_constants(perturb_c1)),
        ("composite symmetry", lambda: check_composite_symmetry(params)),
        ("naive trap", check_naive_trap),
    ]
    if suite == "full":
        groups += [
            ("tst", lambda: check_tst(workers)),
            ("composite exponent", check_composite_exponent),
            ("pitchfork", lambda: check_pitchfork(CRITICAL_EPSILON, workers)),
        ]

    for name, func in groups:
        logger.info("verify: %s", name)
        for check in _guarded(name, func):
            report.checks.append(check)
            if progress is not None:
                progress(check)
    report.seconds = time.perf_counter() - start
    logger.info("verify %s: %d/%d passed in %.1fs", suite,
                len(report.checks) - len(report.failures), len(report.checks), report.seconds)
    return report
