"""Information-flow graph over an elaborated design.

Vertices are all design signals; directed edges record assignment-level flow:
every operand observed by an assignment (including mux conditions, memory
addresses and write enables) flows into the assignment's target.  Edges carry
a provenance tag; self-loops and constants produce no edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Set, Tuple

from .netlist.design import Design, STATEFUL_KINDS
from .netlist.expr import operands

PROV_ASSIGNMENT = "assignment"
PROV_BINDING = "port-binding"
PROV_MEMORY = "memory-flow"


@dataclass(frozen=True)
class IfgVertex:
    name: str
    width: int
    kind: str


@dataclass
class Ifg:
    vertices: Dict[str, IfgVertex]
    edges: Dict[Tuple[str, str], str]  # (src, dst) -> provenance

    def edge_set(self) -> Set[Tuple[str, str]]:
        return set(self.edges)

    def successors(self) -> Dict[str, List[str]]:
        out: Dict[str, List[str]] = {v: [] for v in self.vertices}
        for s, d in self.edges:
            out[s].append(d)
        for v in out:
            out[v].sort()
        return out

    def predecessors(self) -> Dict[str, List[str]]:
        out: Dict[str, List[str]] = {v: [] for v in self.vertices}
        for s, d in self.edges:
            out[d].append(s)
        for v in out:
            out[v].sort()
        return out

    def stateful_vertices(self) -> Set[str]:
        return {v.name for v in self.vertices.values() if v.kind in STATEFUL_KINDS}

    def __eq__(self, other):
        return (
            isinstance(other, Ifg)
            and self.vertices == other.vertices
            and self.edges == other.edges
        )


def _add_edge(edges: Dict[Tuple[str, str], str], src: str, dst: str, prov: str):
    if src == dst:
        return  # flow relation excludes self-loops
    edges.setdefault((src, dst), prov)


def build_ifg(design: Design) -> Ifg:
    """Extract the flow graph of *design*.

    Edge rules: (a) continuous assignment: every operand signal -> target;
    (b) clocked assignment: every next-value operand -> target register;
    (c) port bindings: identity edges; (d) memories: write data/address/enable
    operands -> memory, memory -> read target, read address -> read target.
    """
    vertices = {
        s.name: IfgVertex(s.name, s.width, s.kind) for s in design.signals.values()
    }
    edges: Dict[Tuple[str, str], str] = {}

    for a in design.comb_assigns:
        prov = PROV_BINDING if a.provenance == "binding" else PROV_ASSIGNMENT
        for kind, name in operands(a.expr):
            _add_edge(edges, name, a.target, PROV_MEMORY if kind == "mem" else prov)

    for r in design.reg_assigns:
        for kind, name in operands(r.next_expr):
            _add_edge(
                edges, name, r.target, PROV_MEMORY if kind == "mem" else PROV_ASSIGNMENT
            )

    for w in design.mem_writes:
        for e in (w.data, w.addr, w.enable):
            for kind, name in operands(e):
                _add_edge(edges, name, w.mem, PROV_MEMORY)

    return Ifg(vertices, edges)


def export_ifg(ifg: Ifg) -> str:
    """Deterministic JSON serialization; import_ifg inverts it exactly."""
    doc = {
        "format_version": 1,
        "vertices": [
            {"name": v.name, "width": v.width, "kind": v.kind}
            for v in sorted(ifg.vertices.values(), key=lambda v: v.name)
        ],
        "edges": [
            [s, d, ifg.edges[(s, d)]] for s, d in sorted(ifg.edges)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def import_ifg(text: str) -> Ifg:
    doc = json.loads(text)
    vertices = {
        v["name"]: IfgVertex(v["name"], v["width"], v["kind"])
        for v in doc["vertices"]
    }
    edges = {}
    for s, d, prov in doc["edges"]:
        if s not in vertices or d not in vertices:
            raise ValueError(f"edge ({s}, {d}) references an unknown vertex")
        edges[(s, d)] = prov
    return Ifg(vertices, edges)


def save_ifg(ifg: Ifg, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(export_ifg(ifg))


def load_ifg(path) -> Ifg:
    with open(path, "r", encoding="utf-8") as f:
        return import_ifg(f.read())
