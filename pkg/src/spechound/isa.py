"""Instruction set of the toy speculative CPU fixture.

16-bit encodings, 8 general registers, 4 CSRs.  Field layout:

    [15:12] opcode
    [11:9]  rd / branch operand a / store data register
    [8:6]   rs1 / branch operand b / base register
    [5:3]   rs2 (register ALU ops)
    [5:0]   signed immediate / branch offset (instruction units)
    [8:0]   signed JAL offset (instruction units)
    [1:0]   CSR index (CSRRW)

Semantics notes: BLT compares unsigned; undefined opcodes execute as NOP;
`JAL rd, 0` (jump to self) writes the link register and halts the core.
CSR 1 (`mwait_en`): writing a non-zero value also arms CSR 3 (`mwait_timer`)
to 0xFFFF; a committed store to the monitored address (CSR 2) while
`mwait_en` is non-zero clears the timer to 0.
"""

from __future__ import annotations

from typing import Iterable, List

OP_NOP = 0
OP_ADDI = 1
OP_ADD = 2
OP_SUB = 3
OP_AND = 4
OP_OR = 5
OP_XOR = 6
OP_LW = 7
OP_SW = 8
OP_BEQ = 9
OP_BLT = 10
OP_JAL = 11
OP_CSRRW = 12

OP_NAMES = {
    OP_NOP: "NOP",
    OP_ADDI: "ADDI",
    OP_ADD: "ADD",
    OP_SUB: "SUB",
    OP_AND: "AND",
    OP_OR: "OR",
    OP_XOR: "XOR",
    OP_LW: "LW",
    OP_SW: "SW",
    OP_BEQ: "BEQ",
    OP_BLT: "BLT",
    OP_JAL: "JAL",
    OP_CSRRW: "CSRRW",
}

CSR_NAMES = ("zen_en", "mwait_en", "monitor_addr", "mwait_timer")

CSR_ZEN_EN = 0
CSR_MWAIT_EN = 1
CSR_MONITOR_ADDR = 2
CSR_MWAIT_TIMER = 3

NUM_REGS = 8
IMEM_DEPTH = 256
DMEM_DEPTH = 32
MWAIT_ARM_VALUE = 0xFFFF

MASK16 = 0xFFFF


def sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    if value & (1 << (bits - 1)):
        value -= 1 << bits
    return value


def _imm6(value: int) -> int:
    if not -32 <= value <= 31:
        raise ValueError(f"immediate {value} out of 6-bit signed range")
    return value & 0x3F


def _off9(value: int) -> int:
    if not -256 <= value <= 255:
        raise ValueError(f"offset {value} out of 9-bit signed range")
    return value & 0x1FF


def _reg(r: int) -> int:
    if not 0 <= r < NUM_REGS:
        raise ValueError(f"register r{r} out of range")
    return r


def nop() -> int:
    return 0


def addi(rd: int, rs1: int, imm: int) -> int:
    return (OP_ADDI << 12) | (_reg(rd) << 9) | (_reg(rs1) << 6) | _imm6(imm)


def _rtype(op: int, rd: int, rs1: int, rs2: int) -> int:
    return (op << 12) | (_reg(rd) << 9) | (_reg(rs1) << 6) | (_reg(rs2) << 3)


def add(rd, rs1, rs2):
    return _rtype(OP_ADD, rd, rs1, rs2)


def sub(rd, rs1, rs2):
    return _rtype(OP_SUB, rd, rs1, rs2)


def and_(rd, rs1, rs2):
    return _rtype(OP_AND, rd, rs1, rs2)


def or_(rd, rs1, rs2):
    return _rtype(OP_OR, rd, rs1, rs2)


def xor(rd, rs1, rs2):
    return _rtype(OP_XOR, rd, rs1, rs2)


def lw(rd: int, base: int, imm: int) -> int:
    return (OP_LW << 12) | (_reg(rd) << 9) | (_reg(base) << 6) | _imm6(imm)


def sw(data: int, base: int, imm: int) -> int:
    return (OP_SW << 12) | (_reg(data) << 9) | (_reg(base) << 6) | _imm6(imm)


def beq(a: int, b: int, off: int) -> int:
    return (OP_BEQ << 12) | (_reg(a) << 9) | (_reg(b) << 6) | _imm6(off)


def blt(a: int, b: int, off: int) -> int:
    return (OP_BLT << 12) | (_reg(a) << 9) | (_reg(b) << 6) | _imm6(off)


def jal(rd: int, off: int) -> int:
    return (OP_JAL << 12) | (_reg(rd) << 9) | _off9(off)


def halt() -> int:
    return jal(0, 0)


def csrrw(rd: int, rs1: int, csr: int) -> int:
    if not 0 <= csr < 4:
        raise ValueError(f"CSR index {csr} out of range")
    return (OP_CSRRW << 12) | (_reg(rd) << 9) | (_reg(rs1) << 6) | csr


def assemble(words: Iterable[int]) -> bytes:
    out = bytearray()
    for w in words:
        if not 0 <= w <= MASK16:
            raise ValueError(f"encoding {w:#x} is not a 16-bit word")
        out += w.to_bytes(2, "little")
    return bytes(out)


def disassemble(word: int) -> str:
    word &= MASK16
    op = word >> 12
    rd = (word >> 9) & 7
    rs1 = (word >> 6) & 7
    rs2 = (word >> 3) & 7
    imm = sext(word, 6)
    off9 = sext(word, 9)
    csr = word & 3
    if op == OP_NOP or op > OP_CSRRW:
        return "NOP"
    if op == OP_ADDI:
        return f"ADDI r{rd}, r{rs1}, {imm}"
    if op in (OP_ADD, OP_SUB, OP_AND, OP_OR, OP_XOR):
        return f"{OP_NAMES[op]} r{rd}, r{rs1}, r{rs2}"
    if op == OP_LW:
        return f"LW r{rd}, r{rs1}, {imm}"
    if op == OP_SW:
        return f"SW r{rd}, r{rs1}, {imm}"
    if op in (OP_BEQ, OP_BLT):
        return f"{OP_NAMES[op]} r{rd}, r{rs1}, {imm}"
    if op == OP_JAL:
        return f"JAL r{rd}, {off9}"
    return f"CSRRW r{rd}, r{rs1}, {CSR_NAMES[csr]}"


def program_words(image: bytes) -> List[int]:
    if len(image) % 2:
        raise ValueError("program image must have an even byte length")
    return [int.from_bytes(image[i:i + 2], "little") for i in range(0, len(image), 2)]
