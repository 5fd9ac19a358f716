"""Compile an elaborated design into an executable per-cycle schedule.

Evaluation is two-phase: all combinational assignments settle in dependency
order from cycle-t register values, then every register and memory write
updates simultaneously.  The schedule is generated Python source (one function
per design) so desk-scale fuzzing campaigns stay fast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

from ..netlist.design import Design, KIND_INPUT, KIND_MEM, KIND_REG
from ..netlist.elaborate import comb_evaluation_order
from ..netlist.expr import gen_py


@dataclass
class Schedule:
    design: Design
    fn: Callable  # fn(regs, mems, inputs, out) -> list of (mem, addr, old, new)
    signal_order: List[str]  # waveform sampling order (all non-memory signals)
    signal_index: Dict[str, int]
    reg_order: List[str]  # registers with clocked updates, state list order
    reg_index: Dict[str, int]
    input_order: List[str]  # non-clock top-level inputs
    mem_names: List[str]
    comb_order: List[str]  # combinational targets in evaluation order
    source: str

    def new_state(self) -> Tuple[List[int], Dict[str, List[int]]]:
        regs = [self.design.signals[n].init for n in self.reg_order]
        mems = {
            n: [0] * self.design.signals[n].depth for n in self.mem_names
        }
        return regs, mems


def compile_design(design: Design) -> Schedule:
    """Build the evaluation schedule and generated cycle function."""
    comb = comb_evaluation_order(design)
    widths = design.widths()
    mems = design.mems()

    non_mem = sorted(n for n, s in design.signals.items() if s.kind != KIND_MEM)
    sig_index = {n: i for i, n in enumerate(non_mem)}
    clocked = [r.target for r in design.reg_assigns]
    reg_index = {n: i for i, n in enumerate(clocked)}
    mem_names = sorted(mems)
    mem_index = {n: i for i, n in enumerate(mem_names)}
    inputs = [
        n
        for n in sorted(design.signals)
        if design.signals[n].kind == KIND_INPUT and n not in design.clock_aliases
    ]

    def name_of(kind: str, name: str) -> str:
        if kind == "mem":
            return f"m{mem_index[name]}"
        return f"s{sig_index[name]}"

    lines: List[str] = []
    w = lines.append
    w("def _cycle(regs, mems, inputs, out):")
    for n in mem_names:
        w(f"    m{mem_index[n]} = mems[{n!r}]")
    for n, i in reg_index.items():
        w(f"    s{sig_index[n]} = regs[{i}]")
    for k, n in enumerate(inputs):
        w(f"    s{sig_index[n]} = inputs[{k}]")
    for n in sorted(design.clock_aliases):
        w(f"    s{sig_index[n]} = 0")
    # registers that are combinationally driven (e.g. fed from an instance
    # output) evaluate with the wires below; clocked ones came from state.
    for a in comb:
        w(f"    s{sig_index[a.target]} = "
          f"{gen_py(a.expr, widths, mems, name_of, widths[a.target])}")
    for n, i in sig_index.items():
        w(f"    out[{i}] = s{i}")
    for r in design.reg_assigns:
        w(f"    n{reg_index[r.target]} = "
          f"{gen_py(r.next_expr, widths, mems, name_of, widths[r.target])}")
    w("    _wl = []")
    for port_no, mw in enumerate(design.mem_writes):
        depth = mems[mw.mem][1]
        en = gen_py(mw.enable, widths, mems, name_of)
        addr = gen_py(mw.addr, widths, mems, name_of)
        data = gen_py(mw.data, widths, mems, name_of, mems[mw.mem][0])
        w(f"    if {en}:")
        w(f"        _wl.append(({mem_index[mw.mem]}, ({addr}) % {depth}, {data}))")
    w("    _ev = []")
    w("    _touched = {}")
    w("    _mems_by_idx = _MEMS")
    w("    for _mi, _a, _d in _wl:")
    w("        _m = mems[_mems_by_idx[_mi]]")
    w("        _k = (_mi, _a)")
    w("        if _k not in _touched:")
    w("            _touched[_k] = _m[_a]")
    w("        _m[_a] = _d")
    w("    for (_mi, _a), _old in _touched.items():")
    w("        _new = mems[_mems_by_idx[_mi]][_a]")
    w("        if _new != _old:")
    w("            _ev.append((_mems_by_idx[_mi], _a, _old, _new))")
    for n, i in reg_index.items():
        w(f"    regs[{i}] = n{i}")
    w("    return _ev")

    source = "\n".join(lines)
    namespace: Dict[str, object] = {"_MEMS": mem_names}
    exec(compile(source, f"<schedule:{design.top}>", "exec"), namespace)

    return Schedule(
        design=design,
        fn=namespace["_cycle"],
        signal_order=non_mem,
        signal_index=sig_index,
        reg_order=clocked,
        reg_index=reg_index,
        input_order=inputs,
        mem_names=mem_names,
        comb_order=[a.target for a in comb],
        source=source,
    )
