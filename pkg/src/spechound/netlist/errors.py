"""Error types raised by the netlist frontend."""

from __future__ import annotations

from typing import List, Optional


class NetlistError(Exception):
    """Base class for all netlist frontend errors."""


class NetlistSyntaxError(NetlistError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"syntax error at line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


class DuplicateDeclaration(NetlistError):
    pass


class UndeclaredSignal(NetlistError):
    pass


class UnknownModule(NetlistError):
    pass


class CombinationalLoop(NetlistError):
    def __init__(self, cycle: List[str]):
        super().__init__("combinational loop through: " + " -> ".join(cycle))
        self.cycle = cycle


class MultipleDrivers(NetlistError):
    pass


class NoDriver(NetlistError):
    pass


class WidthMismatch(NetlistError):
    pass


class ClockDomainError(NetlistError):
    pass
