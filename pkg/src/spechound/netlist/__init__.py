"""Netlist frontend: parse `.ntl` sources and elaborate them to a flat Design."""

from .design import (
    KIND_INPUT,
    KIND_MEM,
    KIND_OUTPUT,
    KIND_REG,
    KIND_WIRE,
    STATEFUL_KINDS,
    CombAssign,
    Design,
    MemWrite,
    RegAssign,
    Signal,
    export_design,
)
from .elaborate import comb_evaluation_order, elaborate, validate_source
from .errors import (
    ClockDomainError,
    CombinationalLoop,
    DuplicateDeclaration,
    MultipleDrivers,
    NetlistError,
    NetlistSyntaxError,
    NoDriver,
    UndeclaredSignal,
    UnknownModule,
    WidthMismatch,
)
from .parser import parse_design
from .source import SourceDesign, to_source

__all__ = [
    "parse_design",
    "elaborate",
    "validate_source",
    "comb_evaluation_order",
    "to_source",
    "export_design",
    "SourceDesign",
    "Design",
    "Signal",
    "CombAssign",
    "RegAssign",
    "MemWrite",
    "NetlistError",
    "NetlistSyntaxError",
    "DuplicateDeclaration",
    "UndeclaredSignal",
    "UnknownModule",
    "CombinationalLoop",
    "MultipleDrivers",
    "NoDriver",
    "WidthMismatch",
    "ClockDomainError",
    "KIND_INPUT",
    "KIND_OUTPUT",
    "KIND_WIRE",
    "KIND_REG",
    "KIND_MEM",
    "STATEFUL_KINDS",
]


def load_design(path) -> Design:
    """Parse and elaborate a `.ntl` file."""
    with open(path, "r", encoding="utf-8") as f:
        return elaborate(parse_design(f.read()))
