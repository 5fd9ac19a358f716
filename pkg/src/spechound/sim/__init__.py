"""Cycle-based two-phase simulation of elaborated designs."""

from .compiler import Schedule, compile_design
from .simulator import (
    ProgramError,
    RetireManifest,
    RetireRecord,
    RunResult,
    SimConfig,
    SimulationError,
    VULN_INPUT_PORTS,
    load_program,
    parse_retire_log,
    run,
)

__all__ = [
    "Schedule",
    "compile_design",
    "SimConfig",
    "RunResult",
    "RetireManifest",
    "RetireRecord",
    "SimulationError",
    "ProgramError",
    "VULN_INPUT_PORTS",
    "load_program",
    "parse_retire_log",
    "run",
]
