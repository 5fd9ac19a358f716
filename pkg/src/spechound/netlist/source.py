"""Source-level AST for the `.ntl` netlist language, plus the pretty printer.

The language is a small synchronous RTL subset: one clock domain, two-valued
logic, fixed-width unsigned vectors, non-blocking assignments in
`always @(posedge clk)` blocks, and 1-D memories with synchronous write and
combinational read.  `docs/grammar.md` documents the full grammar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .expr import Const, Expr, to_text


@dataclass(frozen=True)
class Port:
    direction: str  # "input" | "output"
    name: str
    width: int = 1


@dataclass(frozen=True)
class WireDecl:
    name: str
    width: int = 1


@dataclass(frozen=True)
class RegDecl:
    name: str
    width: int = 1
    depth: Optional[int] = None  # memories: number of elements
    init: int = 0


@dataclass(frozen=True)
class ContAssign:
    target: str
    expr: Expr


@dataclass(frozen=True)
class NbAssign:
    """Non-blocking assignment; target_index is set for memory writes."""

    target: str
    expr: Expr
    target_index: Optional[Expr] = None


@dataclass(frozen=True)
class IfStmt:
    cond: Expr
    then_body: Tuple
    else_body: Tuple = ()


@dataclass(frozen=True)
class AlwaysBlock:
    clock: str
    body: Tuple  # tuple of NbAssign | IfStmt


@dataclass(frozen=True)
class Instance:
    module: str
    name: str
    bindings: Tuple  # tuple of (port_name, signal_name)


@dataclass(frozen=True)
class Module:
    name: str
    ports: Tuple
    wires: Tuple
    regs: Tuple
    assigns: Tuple
    always: Tuple
    instances: Tuple


@dataclass(frozen=True)
class SourceDesign:
    modules: Tuple

    def module(self, name: str) -> Module:
        for m in self.modules:
            if m.name == name:
                return m
        raise KeyError(name)


def _range_txt(width: int) -> str:
    return f"[{width - 1}:0] " if width > 1 else ""


def _stmt_txt(s, indent: str) -> List[str]:
    out = []
    if isinstance(s, NbAssign):
        if s.target_index is not None:
            out.append(f"{indent}{s.target}[{to_text(s.target_index)}] <= {to_text(s.expr)};")
        else:
            out.append(f"{indent}{s.target} <= {to_text(s.expr)};")
    elif isinstance(s, IfStmt):
        out.append(f"{indent}if ({to_text(s.cond)}) begin")
        for inner in s.then_body:
            out.extend(_stmt_txt(inner, indent + "  "))
        if s.else_body:
            out.append(f"{indent}end else begin")
            for inner in s.else_body:
                out.extend(_stmt_txt(inner, indent + "  "))
        out.append(f"{indent}end")
    else:
        raise TypeError(type(s))
    return out


def to_source(design: SourceDesign) -> str:
    """Render a SourceDesign back to `.ntl` text (parse . to_source = identity)."""
    lines: List[str] = []
    for m in design.modules:
        ports = ", ".join(f"{p.direction} {_range_txt(p.width)}{p.name}" for p in m.ports)
        lines.append(f"module {m.name}({ports});")
        for w in m.wires:
            lines.append(f"  wire {_range_txt(w.width)}{w.name};")
        for r in m.regs:
            if r.depth is not None:
                lines.append(f"  reg {_range_txt(r.width)}{r.name} [0:{r.depth - 1}];")
            elif r.init:
                lines.append(f"  reg {_range_txt(r.width)}{r.name} = {to_text(Const(r.init, r.width))};")
            else:
                lines.append(f"  reg {_range_txt(r.width)}{r.name};")
        for a in m.assigns:
            lines.append(f"  assign {a.target} = {to_text(a.expr)};")
        for inst in m.instances:
            binds = ", ".join(f".{p}({s})" for p, s in inst.bindings)
            lines.append(f"  {inst.module} {inst.name}({binds});")
        for blk in m.always:
            lines.append(f"  always @(posedge {blk.clock}) begin")
            for s in blk.body:
                lines.extend(_stmt_txt(s, "    "))
            lines.append("  end")
        lines.append("endmodule")
        lines.append("")
    return "\n".join(lines)
