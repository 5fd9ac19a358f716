"""Independent in-order reference interpreter for the toy CPU's ISA.

This is a test oracle: it interprets programs architecturally (one
instruction at a time, no pipeline, no speculation) and emits the same
per-instruction write records the simulator's retirement log uses, so clean
runs can be compared instruction by instruction.  It deliberately shares no
code with the RTL simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

MASK16 = 0xFFFF
NUM_REGS = 8
IMEM_DEPTH = 256
DMEM_DEPTH = 32
CSR_NAMES = (
    "cpu.csr_zen_en",
    "cpu.csr_mwait_en",
    "cpu.csr_monitor_addr",
    "cpu.csr_mwait_timer",
)


def _sext(v: int, bits: int) -> int:
    v &= (1 << bits) - 1
    return v - (1 << bits) if v & (1 << (bits - 1)) else v


@dataclass
class Retired:
    pc: int
    encoding: int
    writes: List[Dict[str, int]]


@dataclass
class InterpreterState:
    regs: List[int] = field(default_factory=lambda: [0] * NUM_REGS)
    dmem: List[int] = field(default_factory=lambda: [0] * DMEM_DEPTH)
    csrs: List[int] = field(default_factory=lambda: [0, 0, 0, 0])
    pc: int = 0
    halted: bool = False


class ReferenceInterpreter:
    def __init__(self, program: bytes):
        if len(program) % 2:
            raise ValueError("program must be an even number of bytes")
        if len(program) > IMEM_DEPTH * 2:
            raise ValueError("program exceeds instruction memory")
        self.imem = [0] * IMEM_DEPTH
        for i in range(0, len(program), 2):
            self.imem[i // 2] = int.from_bytes(program[i:i + 2], "little")
        self.state = InterpreterState()
        self.trace: List[Retired] = []

    def step(self) -> Optional[Retired]:
        s = self.state
        if s.halted:
            return None
        pc = s.pc
        instr = self.imem[pc & 0xFF]
        op = instr >> 12
        rd = (instr >> 9) & 7
        rs1 = (instr >> 6) & 7
        rs2 = (instr >> 3) & 7
        imm = _sext(instr, 6)
        off9 = _sext(instr, 9)
        csr = instr & 3

        writes: List[Dict[str, int]] = []

        def write(target: str, old: int, new: int):
            writes.append({"reg": target, "old": old, "new": new})

        def reg_write(idx: int, value: int):
            write(f"cpu.regfile[{idx}]", s.regs[idx], value)
            s.regs[idx] = value

        def csr_write(idx: int, value: int):
            write(CSR_NAMES[idx], s.csrs[idx], value)
            s.csrs[idx] = value

        next_pc = (pc + 1) & MASK16

        if op == 1:  # ADDI
            reg_write(rd, (s.regs[rs1] + imm) & MASK16)
        elif op == 2:
            reg_write(rd, (s.regs[rs1] + s.regs[rs2]) & MASK16)
        elif op == 3:
            reg_write(rd, (s.regs[rs1] - s.regs[rs2]) & MASK16)
        elif op == 4:
            reg_write(rd, s.regs[rs1] & s.regs[rs2])
        elif op == 5:
            reg_write(rd, s.regs[rs1] | s.regs[rs2])
        elif op == 6:
            reg_write(rd, s.regs[rs1] ^ s.regs[rs2])
        elif op == 7:  # LW
            addr = ((s.regs[rs1] + imm) & MASK16) % DMEM_DEPTH
            reg_write(rd, s.dmem[addr])
        elif op == 8:  # SW
            addr = ((s.regs[rs1] + imm) & MASK16) % DMEM_DEPTH
            old = s.dmem[addr]
            write(f"cpu.dmem[{addr}]", old, s.regs[rd])
            s.dmem[addr] = s.regs[rd]
            if s.csrs[1] != 0 and addr == (s.csrs[2] % DMEM_DEPTH):
                write(CSR_NAMES[3], s.csrs[3], 0)
                s.csrs[3] = 0
        elif op == 9:  # BEQ
            if s.regs[rd] == s.regs[rs1]:
                next_pc = (pc + imm) & MASK16
        elif op == 10:  # BLT (unsigned)
            if s.regs[rd] < s.regs[rs1]:
                next_pc = (pc + imm) & MASK16
        elif op == 11:  # JAL
            reg_write(rd, (pc + 1) & MASK16)
            next_pc = (pc + off9) & MASK16
            if off9 == 0:
                s.halted = True
        elif op == 12:  # CSRRW
            old_csr = s.csrs[csr]
            new_csr = s.regs[rs1]
            reg_write(rd, old_csr)
            csr_write(csr, new_csr)
            if csr == 1 and new_csr != 0:
                write(CSR_NAMES[3], s.csrs[3], 0xFFFF)
                s.csrs[3] = 0xFFFF
        # op 0 and 13..15: NOP

        write("cpu.pc", pc, next_pc)
        s.pc = next_pc
        rec = Retired(pc, instr, writes)
        self.trace.append(rec)
        return rec

    def run(self, max_steps: int) -> List[Retired]:
        for _ in range(max_steps):
            if self.step() is None:
                break
        return self.trace

    def arch_state(self) -> Dict[str, object]:
        s = self.state
        return {
            "regfile": list(s.regs),
            "dmem": list(s.dmem),
            "pc": s.pc,
            "csrs": list(s.csrs),
        }
