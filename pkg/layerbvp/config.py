"""
Run configuration and environment defaults

Environment variables:
    LAYERBVP_DIGITS      default extended precision in decimal digits (50)
    LAYERBVP_OUTPUT_DIR  default output directory (layerbvp_output)
    LAYERBVP_WORKERS     default number of worker processes for sweeps (1)
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import ConfigurationError
from .hpreal import DEFAULT_DIGITS, PrecisionConfig

DIGITS_ENV = "LAYERBVP_DIGITS"
OUTPUT_DIR_ENV = "LAYERBVP_OUTPUT_DIR"
WORKERS_ENV = "LAYERBVP_WORKERS"

DEFAULT_OUTPUT_DIR = "layerbvp_output"


def _int_from_env(name: str, default: int, minimum: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value}")
    return value


def default_digits() -> int:
    """Extended precision from LAYERBVP_DIGITS"""
    return _int_from_env(DIGITS_ENV, DEFAULT_DIGITS, 16)


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


def default_workers() -> int:
    return _int_from_env(WORKERS_ENV, 1, 1)


def load_defaults() -> Dict[str, Any]:
    """All environment-driven defaults, validated"""
    return {
        "digits": default_digits(),
        "output_dir": default_output_dir(),
        "workers": default_workers(),
    }


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation: command, validated flags and where output goes"""

    command: str
    flags: Dict[str, Any] = field(default_factory=dict)
    precision: Optional[PrecisionConfig] = None
    rel_tol: Optional[float] = None
    abs_tol: Optional[float] = None
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        for name in ("rel_tol", "abs_tol"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigurationError(f"{name} must be positive, got {value}")

    def metadata(self) -> Dict[str, Any]:
        """Flattened config for CSV header comments and JSON payloads"""
        meta: Dict[str, Any] = {"command": self.command}
        for key in sorted(self.flags):
            meta[key] = self.flags[key]
        meta["digits"] = self.precision.digits if self.precision else "machine"
        if self.rel_tol is not None:
            meta["rel_tol"] = self.rel_tol
        if self.abs_tol is not None:
            meta["abs_tol"] = self.abs_tol
        return meta
