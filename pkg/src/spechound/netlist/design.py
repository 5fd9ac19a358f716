"""Elaborated, hierarchy-flattened design IR.

Signals carry dot-separated hierarchical names (`top.df1.q`).  Each wire has
exactly one driver; each register has exactly one driver (a clocked next-value
expression, or a continuous/binding driver for registers that are fed from an
instance output).  The combinational dependency relation is acyclic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .expr import Expr, to_text

KIND_INPUT = "input"
KIND_OUTPUT = "output"
KIND_WIRE = "wire"
KIND_REG = "reg"
KIND_MEM = "mem"

STATEFUL_KINDS = (KIND_REG, KIND_MEM)


@dataclass(frozen=True)
class Signal:
    name: str
    width: int
    kind: str
    depth: Optional[int] = None  # memories only
    init: int = 0  # registers only


@dataclass(frozen=True)
class CombAssign:
    target: str
    expr: Expr
    provenance: str = "assign"  # "assign" | "binding"


@dataclass(frozen=True)
class RegAssign:
    target: str
    next_expr: Expr
    clock: str


@dataclass(frozen=True)
class MemWrite:
    """One synchronous write port; ports of a memory apply in list order
    (the last enabled port in a cycle wins)."""

    mem: str
    enable: Expr
    addr: Expr
    data: Expr
    clock: str


@dataclass
class Design:
    top: str
    signals: Dict[str, Signal]
    comb_assigns: List[CombAssign]
    reg_assigns: List[RegAssign]
    mem_writes: List[MemWrite]
    clock: str  # top-level clock input
    clock_aliases: frozenset  # all signals that are identity-copies of the clock

    def widths(self) -> Dict[str, int]:
        return {s.name: s.width for s in self.signals.values() if s.kind != KIND_MEM}

    def mems(self) -> Dict[str, Tuple[int, int]]:
        return {
            s.name: (s.width, s.depth)
            for s in self.signals.values()
            if s.kind == KIND_MEM
        }

    def inputs(self) -> List[str]:
        return [s.name for s in self.signals.values() if s.kind == KIND_INPUT]

    def stateful(self) -> List[str]:
        return [s.name for s in self.signals.values() if s.kind in STATEFUL_KINDS]

    def binding_pairs(self) -> List[Tuple[str, str]]:
        """(source, destination) identity pairs recorded from port bindings."""
        from .expr import Ref

        out = []
        for a in self.comb_assigns:
            if a.provenance == "binding" and isinstance(a.expr, Ref):
                out.append((a.expr.name, a.target))
        return out


def export_design(design: Design) -> str:
    """Serialize the design to JSON with stable (lexicographic) ordering."""
    doc = {
        "format_version": 1,
        "top": design.top,
        "clock": design.clock,
        "signals": [
            {
                "name": s.name,
                "width": s.width,
                "kind": s.kind,
                **({"depth": s.depth} if s.depth is not None else {}),
                **({"init": s.init} if s.init else {}),
            }
            for s in sorted(design.signals.values(), key=lambda s: s.name)
        ],
        "assigns": sorted(
            [
                {"target": a.target, "expr": to_text(a.expr), "provenance": a.provenance}
                for a in design.comb_assigns
            ],
            key=lambda d: d["target"],
        ),
        "registers": sorted(
            [
                {"target": r.target, "next": to_text(r.next_expr), "clock": r.clock}
                for r in design.reg_assigns
            ],
            key=lambda d: d["target"],
        ),
        "memory_writes": [
            {
                "mem": w.mem,
                "enable": to_text(w.enable),
                "addr": to_text(w.addr),
                "data": to_text(w.data),
            }
            for w in design.mem_writes
        ],
    }
    return json.dumps(doc, indent=2) + "\n"
