"""Shared generators and oracles used across the test modules.

The oracles here are deliberately independent re-derivations: forward
path enumeration for the reverse channel search, exhaustive input-flip taint
for the flow graph, linear replay for snapshot reconstruction.
"""

from __future__ import annotations

import random
from typing import Dict, FrozenSet, List, Sequence, Set, Tuple

from spechound.ifg import Ifg, IfgVertex
from spechound.netlist import Design, elaborate, parse_design
from spechound.sim import SimConfig, compile_design, run
from spechound.waveform import Waveform


# -- random DAGs with stateful labels ------------------------------------------

def random_labeled_dag(rng: random.Random, max_vertices: int = 200,
                       max_edges: int = 600) -> Tuple[Ifg, FrozenSet[str], FrozenSet[str]]:
    """A random DAG whose vertices are labeled wire / microarch / arch."""
    n = rng.randrange(5, max_vertices + 1)
    names = [f"v{i}" for i in range(n)]
    kinds = {}
    arch: Set[str] = set()
    micro: Set[str] = set()
    for name in names:
        roll = rng.random()
        if roll < 0.15:
            kinds[name] = "reg"
            arch.add(name)
        elif roll < 0.40:
            kinds[name] = "reg"
            micro.add(name)
        else:
            kinds[name] = "wire"
    vertices = {nm: IfgVertex(nm, 1, kinds[nm]) for nm in names}
    edges = {}
    n_edges = rng.randrange(0, min(max_edges, n * (n - 1) // 2) + 1)
    for _ in range(n_edges):
        i = rng.randrange(n - 1)
        j = rng.randrange(i + 1, n)
        edges[(names[i], names[j])] = "assignment"
    return Ifg(vertices, edges), frozenset(arch), frozenset(micro)


def forward_enumerate_paths(
    ifg: Ifg, arch: FrozenSet[str], micro: FrozenSet[str]
) -> Set[Tuple[str, ...]]:
    """Forward DFS oracle: from every microarchitectural register, walk
    successor edges through non-stateful vertices only, emitting a chain at
    every architectural register reached."""
    succs = ifg.successors()
    stateful = ifg.stateful_vertices()
    found: Set[Tuple[str, ...]] = set()
    for source in sorted(micro):
        stack: List[Tuple[str, Tuple[str, ...]]] = [(source, (source,))]
        while stack:
            v, path = stack.pop()
            for nxt in succs[v]:
                if nxt in path:
                    continue
                if nxt in arch:
                    found.add(path + (nxt,))
                    continue
                if nxt in stateful:  # micro or arch interior: stop
                    continue
                stack.append((nxt, path + (nxt,)))
    return found


# -- random small designs + exhaustive taint oracle ------------------------------

_BIN_OPS = ("&", "|", "^", "+", "-")


def random_small_design(rng: random.Random, max_input_bits: int = 12) -> str:
    """Random `.ntl` source: a handful of inputs feeding a random expression
    DAG of wires, sometimes through registers.  Total input bits <= 12."""
    n_inputs = rng.randrange(2, 5)
    widths = []
    total = 0
    for _ in range(n_inputs):
        w = rng.choice((1, 1, 2, 3))
        if total + w > max_input_bits:
            w = 1
        total += w
        widths.append(w)
    lines = ["module m(input clk, "
             + ", ".join(f"input [{w - 1}:0] i{k}" for k, w in enumerate(widths))
             + ", output [3:0] o);"]
    exprs: List[Tuple[str, int]] = [(f"i{k}", w) for k, w in enumerate(widths)]
    n_wires = rng.randrange(2, 7)
    use_reg = rng.random() < 0.4
    for k in range(n_wires):
        a, wa = exprs[rng.randrange(len(exprs))]
        b, wb = exprs[rng.randrange(len(exprs))]
        kind = rng.random()
        if kind < 0.55:
            op = rng.choice(_BIN_OPS)
            if wa != wb:
                b = f"{{{b}[0], {b}[0]}}" if wb == 1 and wa == 2 else b
            if wa == wb:
                rhs, w = f"({a} {op} {b})", wa
            else:
                rhs, w = f"(~{a})", wa
        elif kind < 0.8:
            c, _ = exprs[rng.randrange(len(exprs))]
            if wa == wb:
                rhs, w = f"({c} != 0) ? {a} : {b}", wa
            else:
                rhs, w = f"(~{a})", wa
        else:
            rhs, w = f"(~{a})", wa
        lines.append(f"  wire [{w - 1}:0] w{k};")
        lines.append(f"  assign w{k} = {rhs};")
        exprs.append((f"w{k}", w))
    if use_reg:
        a, wa = exprs[rng.randrange(len(exprs))]
        lines.append(f"  reg [{wa - 1}:0] r0;")
        lines.append(f"  always @(posedge clk) r0 <= {a};")
        exprs.append(("r0", wa))
    # drive the output from the widest late expression
    a, wa = exprs[-1]
    if wa == 4:
        lines.append(f"  assign o = {a};")
    elif wa < 4:
        pad = 4 - wa
        lines.append(f"  assign o = {{{pad}'d0, {a}}};")
    lines.append("endmodule")
    return "\n".join(lines)


def taint_reachability_check(source: str, cycles: int = 4) -> List[str]:
    """Exhaustive dynamic-taint soundness check of the flow graph.

    For every input bit v and every valuation of the other input bits, flip v
    and compare the full simulation traces; any signal that ever differs must
    be graph-reachable from v's input signal.  Returns a list of violations
    (empty = sound).
    """
    from spechound.ifg import build_ifg

    design = elaborate(parse_design(source))
    schedule = compile_design(design)
    ifg = build_ifg(design)
    succs = ifg.successors()

    def reachable_from(src: str) -> Set[str]:
        seen = {src}
        stack = [src]
        while stack:
            v = stack.pop()
            for u in succs[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return seen

    inputs = [n for n in schedule.input_order]
    widths = {n: design.signals[n].width for n in inputs}
    bit_slots = [(name, bit) for name in inputs for bit in range(widths[name])]
    total_bits = sum(widths.values())
    violations: List[str] = []

    def simulate(assignment: Dict[str, int]) -> Dict[str, List[int]]:
        cfg = SimConfig(max_cycles=cycles, inputs=assignment)
        res = run(schedule, cfg)
        return {
            n: [res.waveform.value_at(n, c) for c in range(cycles)]
            for n in res.waveform.widths
        }

    for name, bit in bit_slots:
        reach = reachable_from(name)
        others = [(n, b) for (n, b) in bit_slots if (n, b) != (name, bit)]
        for pattern in range(1 << len(others)):
            base = {n: 0 for n in inputs}
            for k, (n, b) in enumerate(others):
                if (pattern >> k) & 1:
                    base[n] |= 1 << b
            flipped = dict(base)
            flipped[name] ^= 1 << bit
            t0 = simulate(base)
            t1 = simulate(flipped)
            for sig in t0:
                if t0[sig] != t1[sig] and sig not in reach:
                    violations.append(
                        f"flipping {name}[{bit}] changes {sig}, "
                        f"which is not reachable in the flow graph"
                    )
        if violations:
            break
    assert total_bits <= 12
    return violations


# -- random waveforms -------------------------------------------------------------

def random_waveform(rng: random.Random) -> Waveform:
    n_sigs = rng.randrange(1, 6)
    widths = {}
    kinds = {}
    for i in range(n_sigs):
        name = rng.choice((f"s{i}", f"top.a{i}", f"top.u{i}.x{i}"))
        widths[name] = rng.choice((1, 1, 4, 16, 33))
        kinds[name] = rng.choice(("reg", "wire"))
    w = Waveform.empty(widths, kinds)
    max_cycle = rng.randrange(0, 12)
    for name in widths:
        cycle = 0
        while cycle <= max_cycle:
            w.record(cycle, name, rng.randrange(1 << min(widths[name], 30)))
            cycle += rng.randrange(1, 4)
    w.close(max_cycle)
    return w


def snapshot_by_replay(w: Waveform, cycle: int) -> Dict[str, int]:
    """Linear replay oracle for snapshot reconstruction."""
    out = {}
    for name in w.widths:
        value = 0
        for c, v in w.changes[name]:
            if c > cycle:
                break
            value = v
        out[name] = value
    return out
