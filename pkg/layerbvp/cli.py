"""
Command-line front end

    layerbvp solve --epsilon 0.1 --branch b0 --order numeric
    layerbvp solve --epsilon 0.05 --branch b0 --order 1 --error-profile
    layerbvp slopes --eps-min 0.04 --eps-max 0.1 --count 5 --precision 50
    layerbvp scan --epsilon 0.1 --slope-min -12 --slope-max 0.999 --count 400
    layerbvp bifurcation locate
    layerbvp bifurcation grid --window coarse
    layerbvp verify --suite fast

Data goes to CSV/JSON files under --out; progress goes to stdout.
Exit codes: 0 success, 1 numerical failure, 2 invalid request.
"""

import argparse
import logging
import sys
import traceback
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .asymptotics import Branch, composite, write_composite_csv
from .bifurcation import (
    fit_pitchfork,
    grid_window,
    locate_critical,
    residual_grid,
    write_grid_csv,
)
from .config import RunConfig, load_defaults
from .dynamics import CRITICAL_EPSILON, Params
from .errors import (
    BranchNotFoundError,
    ConfigurationError,
    InvalidBranchError,
    LayerBVPError,
)
from .export import write_json
from .hpreal import PrecisionConfig, kernel_for
from .integrate import IntegratorConfig
from .shooting import (
    composite_error,
    find_branch,
    scan_target,
    slope_sweep,
    write_error_csv,
    write_phase_plane_csv,
    write_scan_csv,
    write_slopes_csv,
    write_solution_csv,
)
from .verify import SUITES, Check, run_suite

logger = logging.getLogger(__name__)

SEPARATOR = "=" * 70
ORDERS = ("0", "1", "numeric")
INVALID_REQUEST = (BranchNotFoundError, InvalidBranchError, ConfigurationError)


def _banner(title: str):
    print(SEPARATOR)
    print(f"🚀 {title}")
    print(SEPARATOR)


def _wrote(path: Path):
    print(f"📁 {path}")


def _eps_tag(epsilon: float) -> str:
    return f"{epsilon:g}"


# ---------------------------------------------------------------------------
# flag validation
# ---------------------------------------------------------------------------

def _precision(value: Optional[str], default: Optional[int]) -> Optional[PrecisionConfig]:
    """'machine', a digit count, or the default (None = machine)"""
    if value is None:
        return PrecisionConfig(default) if default is not None else None
    if value.strip().lower() == "machine":
        return None
    try:
        digits = int(value)
    except ValueError:
        raise ConfigurationError(f"--precision must be 'machine' or a digit count, got {value!r}")
    return PrecisionConfig(digits)


def _positive(name: str, value: float):
    if not value > 0:
        raise ConfigurationError(f"{name} must be positive, got {value}")


def build_config(args: argparse.Namespace) -> RunConfig:
    """Validate flags and turn them into a RunConfig before anything is computed"""
    defaults = load_defaults()
    command = args.command
    flags: Dict[str, Any] = {}
    precision_default = defaults["digits"] if command == "slopes" else None

    if command == "solve":
        _positive("--epsilon", args.epsilon)
        branch = Branch.parse(args.branch)
        if args.epsilon >= CRITICAL_EPSILON and branch is not Branch.M:
            raise BranchNotFoundError(
                f"branch {branch.value} does not exist at eps={args.epsilon} >= eps_c "
                f"({CRITICAL_EPSILON}); only the merged solution remains (--branch m)"
            )
        if args.points < 2:
            raise ConfigurationError(f"--points must be at least 2, got {args.points}")
        if args.error_profile and args.order == "numeric":
            raise ConfigurationError("--error-profile needs --order 0 or 1")
        flags.update(epsilon=args.epsilon, branch=branch.value, order=args.order,
                     points=args.points, error_profile=args.error_profile)
    elif command == "slopes":
        _positive("--eps-min", args.eps_min)
        if not args.eps_max >= args.eps_min:
            raise ConfigurationError("--eps-max must not be below --eps-min")
        if args.eps_max >= CRITICAL_EPSILON:
            raise ConfigurationError(f"--eps-max must stay below eps_c = {CRITICAL_EPSILON}")
        if args.count < 1:
            raise ConfigurationError(f"--count must be at least 1, got {args.count}")
        flags.update(eps_min=args.eps_min, eps_max=args.eps_max, count=args.count)
    elif command == "scan":
        _positive("--epsilon", args.epsilon)
        if not args.slope_max > args.slope_min:
            raise ConfigurationError("--slope-max must exceed --slope-min")
        if args.count < 2:
            raise ConfigurationError(f"--count must be at least 2, got {args.count}")
        flags.update(epsilon=args.epsilon, slope_min=args.slope_min,
                     slope_max=args.slope_max, count=args.count)
    elif command == "bifurcation":
        flags["action"] = args.action
        if args.action == "grid":
            if args.n_eps < 2 or args.n_slope < 2:
                raise ConfigurationError("--n-eps and --n-slope must be at least 2")
            flags.update(window=args.window, n_eps=args.n_eps, n_slope=args.n_slope)
    elif command == "verify":
        flags.update(suite=args.suite, perturb_c1=args.perturb_c1)

    workers = args.workers if args.workers is not None else defaults["workers"]
    output_dir = Path(args.out) if args.out else defaults["output_dir"]
    return RunConfig(command, flags, _precision(args.precision, precision_default),
                     args.rel_tol, args.abs_tol, output_dir, workers)


def _kernel(config: RunConfig):
    return kernel_for(config.precision.digits if config.precision else None)


def _integrator(config: RunConfig, kernel) -> IntegratorConfig:
    overrides = {}
    if config.rel_tol is not None:
        overrides["rel_tol"] = config.rel_tol
    if config.abs_tol is not None:
        overrides["abs_tol"] = config.abs_tol
    return IntegratorConfig.for_kernel(kernel, **overrides)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(config: RunConfig) -> int:
    f = config.flags
    k = _kernel(config)
    params = Params(f["epsilon"])
    branch = Branch.parse(f["branch"])
    tag = f"{branch.value}_eps{_eps_tag(params.epsilon)}"
    _banner(f"Solving {branch.value} at eps={params.epsilon} (order {f['order']})")

    if f["order"] == "numeric":
        solution = find_branch(branch, params, _integrator(config, k), k)
        print(f"✓ initial slope {k.format(solution.initial_slope, 15)}")
        print(f"✓ 1 - y'(0) = {k.format(solution.initial_gap, 15)}")
        print(f"✓ residual y(1) + 1 = {k.format(solution.residual, 3)}")
        if solution.merged:
            print("⚠️  above eps_c: this is the merged solution")
        meta = config.metadata()
        _wrote(write_solution_csv(solution, config.output_dir / f"solution_{tag}.csv",
                                  f["points"], meta))
        _wrote(write_phase_plane_csv(solution, config.output_dir / f"phase_{tag}.csv", meta))
    else:
        cs = composite(branch, int(f["order"]), params, k)
        _wrote(write_composite_csv(cs, config.output_dir / f"composite_{tag}_o{f['order']}.csv",
                                   f["points"]))
        if f["error_profile"]:
            max_error, profile = composite_error(branch, int(f["order"]), params,
                                                 _integrator(config, k), k, f["points"])
            print(f"✓ max |composite - numerical| = {k.format(max_error, 6)}")
            path = config.output_dir / f"error_{tag}_o{f['order']}.csv"
            _wrote(write_error_csv(profile, path, k, config.metadata()))
    return 0


def cmd_slopes(config: RunConfig) -> int:
    f = config.flags
    k = _kernel(config)
    epsilons = [float(e) for e in np.linspace(f["eps_min"], f["eps_max"], f["count"])]
    _banner(f"Initial slopes for {len(epsilons)} values of eps")
    records = slope_sweep(epsilons, k, _integrator(config, k), config.workers)
    for r in records:
        print(f"✓ eps={r.epsilon:<8g} {r.branch.value:<3} slope={k.format(r.slope, 12)} "
              f"ratio={k.format(r.ratio, 8)}")
    _wrote(write_slopes_csv(records, config.output_dir / "slopes.csv", k, config.metadata()))
    return 0


def cmd_scan(config: RunConfig) -> int:
    f = config.flags
    k = _kernel(config)
    params = Params(f["epsilon"])
    _banner(f"Target function at eps={params.epsilon}")
    rows = scan_target(params, (f["slope_min"], f["slope_max"]), f["count"],
                       _integrator(config, k), k, config.workers)
    path = config.output_dir / f"scan_eps{_eps_tag(params.epsilon)}.csv"
    _wrote(write_scan_csv(rows, path, k, config.metadata()))
    return 0


def cmd_bifurcation(config: RunConfig) -> int:
    f = config.flags
    k = _kernel(config)
    if f["action"] == "locate":
        _banner("Locating the critical point")
        point = locate_critical(k)
        print(f"✓ eps_c = {k.format(point.epsilon_c, 15)}")
        print(f"✓ z_c   = {k.format(point.z_c, 15)}")
        payload = point.payload(k)
        payload["config"] = config.metadata()
        _wrote(write_json(config.output_dir / "critical.json", payload))
        return 0

    _banner(f"Residual grid, {f['window']} window")
    eps_range, slope_range = grid_window(f["window"])
    grid = residual_grid(eps_range, slope_range, f["n_eps"], f["n_slope"],
                         _integrator(config, k), k, config.workers)
    meta = config.metadata()
    _wrote(write_grid_csv(grid, config.output_dir / f"grid_{f['window']}.csv", k, meta))
    if f["window"] == "fine":
        fit = fit_pitchfork(grid, CRITICAL_EPSILON)
        print(f"✓ A = {fit.A:.6g}, B = {fit.B:.6g}, fitted eps_c = {fit.epsilon_c_fit:.12g}")
        payload = {"A": fit.A, "B": fit.B, "epsilon_c_fit": fit.epsilon_c_fit,
                   "coefficients": fit.coefficients, "rms": fit.rms,
                   "condition": fit.condition, "config": meta}
        _wrote(write_json(config.output_dir / "pitchfork_fit.json", payload))
    return 0


def _print_check(check: Check):
    mark = "✓" if check.passed else "✗"
    name, measured, tolerance, _ = check.row()
    print(f"{mark} {name:<52} {measured:>14} {tolerance:>18}")


def cmd_verify(config: RunConfig) -> int:
    f = config.flags
    _banner(f"Verification suite: {f['suite']}")
    print(f"  {'check':<52} {'measured':>14} {'tolerance':>18}")
    report = run_suite(f["suite"], f["perturb_c1"], config.workers, progress=_print_check)
    _wrote(write_json(config.output_dir / f"verify_{f['suite']}.json", report.payload()))
    print(SEPARATOR)
    if report.passed:
        print(f"✅ {len(report.checks)} checks passed in {report.seconds:.1f}s")
        return 0
    print(f"❌ {len(report.failures)} of {len(report.checks)} checks failed")
    return 1


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "solve": cmd_solve,
    "slopes": cmd_slopes,
    "scan": cmd_scan,
    "bifurcation": cmd_bifurcation,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision", default=None,
                        help="'machine' or decimal digits for the extended kernel")
    common.add_argument("--workers", type=int, default=None,
                        help="worker processes for sweeps (default: $LAYERBVP_WORKERS or 1)")
    common.add_argument("--out", default=None,
                        help="output directory (default: $LAYERBVP_OUTPUT_DIR or layerbvp_output)")
    common.add_argument("--rel-tol", type=float, default=None, help="integrator relative tolerance")
    common.add_argument("--abs-tol", type=float, default=None, help="integrator absolute tolerance")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="layerbvp",
        description="Boundary layers of eps y'' = y y' - y: shooting, asymptotics, bifurcation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve one branch")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--branch", required=True, help="b0, m or b1")
    p.add_argument("--order", choices=ORDERS, default="numeric",
                   help="composite order 0 or 1, or the numerical solution")
    p.add_argument("--points", type=int, default=1001, help="grid points on [0, 1]")
    p.add_argument("--error-profile", action="store_true",
                   help="with --order 0 or 1, also write composite minus numerical solution")

    p = sub.add_parser("slopes", parents=[common], help="initial slopes vs eps, all branches")
    p.add_argument("--eps-min", type=float, default=0.04)
    p.add_argument("--eps-max", type=float, default=0.1)
    p.add_argument("--count", type=int, default=7)

    p = sub.add_parser("scan", parents=[common], help="target function y(1) + 1 over slopes")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--slope-min", type=float, default=-12.0)
    p.add_argument("--slope-max", type=float, default=0.999)
    p.add_argument("--count", type=int, default=400)

    p = sub.add_parser("bifurcation", parents=[common], help="critical point and pitchfork")
    p.add_argument("action", choices=("locate", "grid"))
    p.add_argument("--window", choices=("coarse", "fine"), default="coarse")
    p.add_argument("--n-eps", type=int, default=51)
    p.add_argument("--n-slope", type=int, default=101)

    p = sub.add_parser("verify", parents=[common], help="run the self-checks")
    p.add_argument("--suite", choices=SUITES, default="fast")
    p.add_argument("--perturb-c1", type=float, default=0.0,
                   help="shift the M constant c1 (negative control)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = build_config(args)
        logger.debug("run config: %s", config)
        return COMMANDS[config.command](config)
    except INVALID_REQUEST as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return 2
    except LayerBVPError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\n⚠️  Interrupted")
        return 1
    except Exception as e:
        print(f"❌ Fatal error: {e}", file=sys.stderr)
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
