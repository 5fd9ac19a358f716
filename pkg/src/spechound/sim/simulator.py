"""Cycle-based simulation: run a compiled schedule, record the waveform,
sample the retirement interface and the speculation indicators."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from ..netlist.design import KIND_REG
from ..trace import IndicatorManifest, MisspecWindow
from ..waveform import Waveform


class SimulationError(Exception):
    pass


class ProgramError(SimulationError):
    """Program image does not fit the instruction memory."""


@dataclass(frozen=True)
class RetireManifest:
    """Signal roles of the fixture's retirement interface.

    Old values in the log come from the simulator's own bookkeeping of the
    retirement stream (no reference model involved): it replays each logged
    new-value onto a shadow map of architectural names.
    """

    valid: str
    pc: str
    instr: str
    next_pc_signal: str
    pc_target: str
    reg_en: str
    reg_idx: str
    reg_val: str
    reg_target: str
    csr_en: str
    csr_idx: str
    csr_val: str
    csr_targets: Tuple[str, ...]
    mem_en: str
    mem_addr: str
    mem_val: str
    mem_target: str
    side_effects: Tuple[Tuple[str, str, int], ...]  # (enable, target, value)

    @classmethod
    def from_json(cls, text: str) -> "RetireManifest":
        d = json.loads(text)
        return cls(
            valid=d["valid"],
            pc=d["pc"],
            instr=d["instr"],
            next_pc_signal=d["next_pc"]["signal"],
            pc_target=d["next_pc"]["target"],
            reg_en=d["reg_write"]["en"],
            reg_idx=d["reg_write"]["idx"],
            reg_val=d["reg_write"]["val"],
            reg_target=d["reg_write"]["target"],
            csr_en=d["csr_write"]["en"],
            csr_idx=d["csr_write"]["idx"],
            csr_val=d["csr_write"]["val"],
            csr_targets=tuple(d["csr_write"]["targets"]),
            mem_en=d["mem_write"]["en"],
            mem_addr=d["mem_write"]["addr"],
            mem_val=d["mem_write"]["val"],
            mem_target=d["mem_write"]["target"],
            side_effects=tuple(
                (s["en"], s["target"], int(s["value"])) for s in d.get("side_effects", [])
            ),
        )

    @classmethod
    def load(cls, path) -> "RetireManifest":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())


@dataclass
class RetireRecord:
    cycle: int
    pc: int
    encoding: int
    writes: List[Dict[str, int]]  # {"reg": name, "old": int, "new": int}

    def to_json(self) -> str:
        return json.dumps(
            {"cycle": self.cycle, "pc": self.pc, "encoding": self.encoding,
             "writes": self.writes},
            sort_keys=True,
        )


def parse_retire_log(text: str) -> List[RetireRecord]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        d = json.loads(line)
        out.append(RetireRecord(d["cycle"], d["pc"], d["encoding"], d["writes"]))
    return out


# Default mapping from planted-vulnerability flags to fixture input ports.
VULN_INPUT_PORTS = {
    "zenbleed_like": "cpu.vuln_zenbleed",
    "mwait_like": "cpu.vuln_mwait",
}


@dataclass
class SimConfig:
    max_cycles: int
    program: Optional[bytes] = None
    program_memory: str = "cpu.imem"
    inputs: Dict[str, int] = field(default_factory=dict)
    stimulus: Dict[str, List[Tuple[int, int]]] = field(default_factory=dict)
    vuln_flags: FrozenSet[str] = frozenset()
    vuln_input_map: Dict[str, str] = field(default_factory=lambda: dict(VULN_INPUT_PORTS))
    halt_signal: Optional[str] = None
    indicators: Optional[IndicatorManifest] = None
    retire: Optional[RetireManifest] = None

    def __post_init__(self):
        if self.max_cycles < 1:
            raise SimulationError("max_cycles must be >= 1")
        unknown = set(self.vuln_flags) - set(self.vuln_input_map)
        if unknown:
            raise SimulationError(f"unknown vulnerability flags: {sorted(unknown)}")


@dataclass
class RunResult:
    waveform: Waveform
    retire_log: List[RetireRecord]
    windows: List[MisspecWindow]  # ground truth, sampled from live state
    open_windows_discarded: int
    halted: bool
    cycles_run: int
    final_regs: Dict[str, int]
    final_mems: Dict[str, List[int]]
    # architectural state as committed by the retirement stream; raw register
    # state additionally reflects eager writes of instructions still in
    # flight when max_cycles cuts a run short
    committed: Dict[str, int] = field(default_factory=dict)

    def write_retire_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for r in self.retire_log:
                f.write(r.to_json() + "\n")


def _mem_vector(values: List[int], width: int) -> int:
    vec = 0
    for i, v in enumerate(values):
        vec |= v << (i * width)
    return vec


def load_program(schedule, mems: Dict[str, List[int]], name: str, image: bytes) -> None:
    design = schedule.design
    if name not in mems:
        raise ProgramError(f"design has no memory named '{name}'")
    sig = design.signals[name]
    if sig.width % 8:
        raise ProgramError(f"memory '{name}' width {sig.width} is not byte-aligned")
    step = sig.width // 8
    if len(image) % step:
        raise ProgramError(
            f"program length {len(image)} is not a multiple of {step} bytes"
        )
    if len(image) > sig.depth * step:
        raise ProgramError(
            f"program of {len(image)} bytes exceeds memory "
            f"'{name}' capacity of {sig.depth * step} bytes"
        )
    arr = mems[name]
    for i in range(0, len(image), step):
        arr[i // step] = int.from_bytes(image[i:i + step], "little")


def run(schedule, config: SimConfig) -> RunResult:
    """Simulate max_cycles cycles (or until the halt register asserts).

    Bit-exact deterministic for identical inputs.  The waveform records every
    signal at every cycle; memories are recorded as concatenated vectors.
    """
    design = schedule.design
    regs, mems = schedule.new_state()
    if config.program is not None:
        load_program(schedule, mems, config.program_memory, config.program)

    inputs = [0] * len(schedule.input_order)
    input_pos = {n: i for i, n in enumerate(schedule.input_order)}
    driven = dict(config.inputs)
    for flag in config.vuln_flags:
        driven[config.vuln_input_map[flag]] = 1
    for name, value in driven.items():
        if name not in input_pos:
            raise SimulationError(f"'{name}' is not a drivable input port")
        inputs[input_pos[name]] = value
    stim = {}
    for name, entries in config.stimulus.items():
        if name not in input_pos:
            raise SimulationError(f"stimulus target '{name}' is not an input port")
        stim[input_pos[name]] = sorted(entries)

    sig_index = schedule.signal_index
    mem_widths = {n: design.signals[n].width for n in schedule.mem_names}
    widths = dict(design.widths())
    kinds = {}
    for n, s in design.signals.items():
        if s.kind == "mem":
            widths[n] = s.width * s.depth
            kinds[n] = "reg"
        else:
            kinds[n] = "reg" if s.kind == KIND_REG else "wire"
    wave = Waveform.empty(widths, kinds)

    halt_reg_idx = None
    halt_sig_idx = None
    if config.halt_signal:
        if config.halt_signal in schedule.reg_index:
            halt_reg_idx = schedule.reg_index[config.halt_signal]
        elif config.halt_signal in sig_index:
            halt_sig_idx = sig_index[config.halt_signal]
        else:
            raise SimulationError(f"halt signal '{config.halt_signal}' not found")

    ind = config.indicators
    if ind is not None:
        for s in ind.signals():
            if s not in sig_index:
                raise SimulationError(f"indicator signal '{s}' not found")
        ind_idx = (
            sig_index[ind.start_signal],
            sig_index[ind.resolve_signal],
            sig_index[ind.mispredict_signal],
            sig_index[ind.instr_signal],
        )

    ret = config.retire
    shadow: Dict[str, int] = {}
    if ret is not None:
        for s in (ret.valid, ret.pc, ret.instr, ret.next_pc_signal, ret.reg_en,
                  ret.reg_idx, ret.reg_val, ret.csr_en, ret.csr_idx, ret.csr_val,
                  ret.mem_en, ret.mem_addr, ret.mem_val):
            if s not in sig_index:
                raise SimulationError(f"retire interface signal '{s}' not found")

        def shadow_old(name: str) -> int:
            if name in shadow:
                return shadow[name]
            base = name.split("[", 1)[0]
            sig = design.signals.get(base)
            return sig.init if sig is not None and sig.kind == KIND_REG else 0

    out = [0] * len(schedule.signal_order)
    prev = None
    mem_vec = {n: _mem_vector(mems[n], mem_widths[n]) for n in schedule.mem_names}

    retire_log: List[RetireRecord] = []
    windows: List[MisspecWindow] = []
    open_start: Optional[int] = None
    open_instr = 0
    prev_start_val: Optional[int] = None
    next_window_id = 1

    halted = False
    cycles_run = 0
    fn = schedule.fn

    for cycle in range(config.max_cycles):
        if halt_reg_idx is not None and regs[halt_reg_idx] == 1:
            halted = True
            break
        for pos, entries in stim.items():
            for c, v in entries:
                if c == cycle:
                    inputs[pos] = v

        events = fn(regs, mems, inputs, out)
        cycles_run = cycle + 1

        if prev is None:
            for i, name in enumerate(schedule.signal_order):
                wave.record(0, name, out[i])
            for n in schedule.mem_names:
                wave.record(0, n, mem_vec[n])
            prev = list(out)
        else:
            for i, v in enumerate(out):
                if v != prev[i]:
                    wave.record(cycle, schedule.signal_order[i], v)
                    prev[i] = v
        wave.close(cycle)
        for mname, addr, old, new in events:
            w = mem_widths[mname]
            vec = mem_vec[mname] ^ ((old ^ new) << (addr * w))
            mem_vec[mname] = vec
            wave.record(cycle + 1, mname, vec)

        if ind is not None:
            sv = out[ind_idx[0]]
            opened = False
            if sv == ind.start_value and prev_start_val != ind.start_value:
                if open_start is None:
                    open_start = cycle
                    open_instr = out[ind_idx[3]]
                    opened = True
            if out[ind_idx[1]] == ind.resolve_value and open_start is not None \
                    and not opened:
                mis = out[ind_idx[2]] == ind.mispredict_value
                windows.append(
                    MisspecWindow(next_window_id, open_start, cycle, open_instr, mis)
                )
                next_window_id += 1
                open_start = None
            prev_start_val = sv

        if ret is not None and out[sig_index[ret.valid]] == 1:
            writes: List[Dict[str, int]] = []

            def log_write(target: str, new: int):
                old = shadow_old(target)
                writes.append({"reg": target, "old": old, "new": new})
                shadow[target] = new

            if out[sig_index[ret.reg_en]]:
                idx = out[sig_index[ret.reg_idx]]
                log_write(f"{ret.reg_target}[{idx}]", out[sig_index[ret.reg_val]])
            if out[sig_index[ret.csr_en]]:
                idx = out[sig_index[ret.csr_idx]]
                if idx >= len(ret.csr_targets):
                    raise SimulationError(f"csr index {idx} out of range")
                log_write(ret.csr_targets[idx], out[sig_index[ret.csr_val]])
            if out[sig_index[ret.mem_en]]:
                addr = out[sig_index[ret.mem_addr]]
                log_write(f"{ret.mem_target}[{addr}]", out[sig_index[ret.mem_val]])
            for en_sig, target, value in ret.side_effects:
                if out[sig_index[en_sig]]:
                    log_write(target, value)
            log_write(ret.pc_target, out[sig_index[ret.next_pc_signal]])
            retire_log.append(
                RetireRecord(
                    cycle=cycle,
                    pc=out[sig_index[ret.pc]],
                    encoding=out[sig_index[ret.instr]],
                    writes=writes,
                )
            )

        if halt_sig_idx is not None and out[halt_sig_idx] == 1:
            halted = True
            break

    final_regs = {n: regs[i] for n, i in schedule.reg_index.items()}
    return RunResult(
        waveform=wave,
        retire_log=retire_log,
        windows=windows,
        open_windows_discarded=1 if open_start is not None else 0,
        halted=halted,
        cycles_run=cycles_run,
        final_regs=final_regs,
        final_mems={n: list(v) for n, v in mems.items()},
        committed=dict(shadow),
    )
