"""
layerbvp - boundary layers of eps y'' = y y' - y, y(0) = 1, y(1) = -1

Shooting solutions of all three branches at machine or extended precision,
their matched-asymptotic composites and slope laws, and the pitchfork where
the branches merge.
"""

__version__ = "1.0.0"

from .asymptotics import Branch, composite, composite_eval, slope_b0, slope_tst
from .bifurcation import locate_critical, residual_grid
from .dynamics import CRITICAL_EPSILON, Params, PhasePoint
from .errors import LayerBVPError
from .hpreal import MACHINE, extended
from .integrate import IntegratorConfig
from .shooting import find_branch, slope_sweep, target

__all__ = [
    "Branch",
    "CRITICAL_EPSILON",
    "IntegratorConfig",
    "LayerBVPError",
    "MACHINE",
    "Params",
    "PhasePoint",
    "composite",
    "composite_eval",
    "extended",
    "find_branch",
    "locate_critical",
    "residual_grid",
    "slope_b0",
    "slope_sweep",
    "slope_tst",
    "target",
]
