"""Speculative-window analysis over waveforms.

Builds the misspeculation table (window id, start/end cycles, speculated
instruction, outcome) from design-specific indicator signals, and computes
start/end snapshot discrepancies per window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from .waveform import Waveform


@dataclass(frozen=True)
class IndicatorManifest:
    """Names and asserted values of the speculation indicator signals."""

    start_signal: str
    start_value: int
    resolve_signal: str
    resolve_value: int
    mispredict_signal: str
    mispredict_value: int
    instr_signal: str
    settle_cycles: int = 0

    @classmethod
    def from_json(cls, text: str) -> "IndicatorManifest":
        doc = json.loads(text)
        return cls(
            start_signal=doc["start"]["signal"],
            start_value=int(doc["start"]["value"]),
            resolve_signal=doc["resolve"]["signal"],
            resolve_value=int(doc["resolve"]["value"]),
            mispredict_signal=doc["mispredict"]["signal"],
            mispredict_value=int(doc["mispredict"]["value"]),
            instr_signal=doc["instr"],
            settle_cycles=int(doc.get("settle_cycles", 0)),
        )

    @classmethod
    def load(cls, path) -> "IndicatorManifest":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())

    def signals(self) -> Tuple[str, ...]:
        return (
            self.start_signal,
            self.resolve_signal,
            self.mispredict_signal,
            self.instr_signal,
        )


@dataclass(frozen=True)
class MisspecWindow:
    id: int
    start_cycle: int
    end_cycle: int
    instruction: int
    mispredicted: bool


@dataclass
class MstResult:
    windows: List[MisspecWindow]
    discarded_open: int = 0  # windows still open at trace end
    anomalies: int = 0  # resolve asserted with no open window

    def mispredicted(self) -> List[MisspecWindow]:
        return [w for w in self.windows if w.mispredicted]


def build_mst(w: Waveform, m: IndicatorManifest) -> MstResult:
    """Scan the trace for speculative windows.

    A window opens when the start signal transitions to its asserted value and
    closes at the first later cycle where the resolve signal is asserted.
    """
    for sig in m.signals():
        if sig not in w.widths:
            raise KeyError(f"indicator signal '{sig}' not present in waveform")

    windows: List[MisspecWindow] = []
    anomalies = 0
    open_start: Optional[int] = None
    open_instr = 0
    prev_start_val = w.value_at(m.start_signal, 0)
    next_id = 1

    for cycle in range(1, w.max_cycle + 1):
        sv = w.value_at(m.start_signal, cycle)
        rv = w.value_at(m.resolve_signal, cycle)
        opened_this_cycle = False
        if sv == m.start_value and prev_start_val != m.start_value:
            if open_start is None:
                open_start = cycle
                open_instr = w.value_at(m.instr_signal, cycle)
                opened_this_cycle = True
        if rv == m.resolve_value:
            if open_start is not None and not opened_this_cycle:
                mis = w.value_at(m.mispredict_signal, cycle) == m.mispredict_value
                windows.append(
                    MisspecWindow(next_id, open_start, cycle, open_instr, mis)
                )
                next_id += 1
                open_start = None
            elif open_start is None:
                prev_rv = w.value_at(m.resolve_signal, cycle - 1)
                if prev_rv != m.resolve_value:
                    anomalies += 1
        prev_start_val = sv

    return MstResult(windows, discarded_open=1 if open_start is not None else 0,
                     anomalies=anomalies)


@dataclass
class WindowDiff:
    window_id: int
    start_snapshot_cycle: int
    end_snapshot_cycle: int
    all: Dict[str, Tuple[int, int]]  # signal -> (before, after), differing only
    arch: Dict[str, Tuple[int, int]]
    micro: Dict[str, Tuple[int, int]]


def window_diff(
    w: Waveform,
    win: MisspecWindow,
    settle: int,
    arch: FrozenSet[str],
    micro: FrozenSet[str],
) -> WindowDiff:
    """Compare the snapshot just before the window with the snapshot
    settle cycles after it closes; report every signal whose values differ."""
    if win.start_cycle < 1:
        raise ValueError(f"window {win.id}: start cycle must be >= 1")
    before_cycle = win.start_cycle - 1
    after_cycle = win.end_cycle + settle
    if after_cycle > w.max_cycle:
        raise ValueError(
            f"window {win.id}: end+settle cycle {after_cycle} exceeds trace "
            f"end {w.max_cycle}"
        )
    diffs: Dict[str, Tuple[int, int]] = {}
    for name in w.widths:
        b = w.value_at(name, before_cycle)
        a = w.value_at(name, after_cycle)
        if a != b:
            diffs[name] = (b, a)
    return WindowDiff(
        window_id=win.id,
        start_snapshot_cycle=before_cycle,
        end_snapshot_cycle=after_cycle,
        all=diffs,
        arch={n: v for n, v in diffs.items() if n in arch},
        micro={n: v for n, v in diffs.items() if n in micro},
    )


# -- misspeculation table rendering -------------------------------------------

def mst_to_json(result: MstResult) -> str:
    doc = {
        "format_version": 1,
        "windows": [
            {
                "id": w.id,
                "start": w.start_cycle,
                "end": w.end_cycle,
                "instruction": f"{w.instruction:04X}",
                "mispredicted": w.mispredicted,
            }
            for w in result.windows
        ],
        "discarded_open": result.discarded_open,
        "anomalies": result.anomalies,
    }
    return json.dumps(doc, indent=2) + "\n"


def mst_to_table(
    windows: List[MisspecWindow], disassemble=None, instr_hex_digits: int = 4
) -> str:
    """Human-readable table: ID | Start | End | Instruction | Instruction(Readable)."""
    header = ("ID", "Start", "End", "Instruction", "Instruction(Readable)")
    rows = []
    for w in windows:
        readable = disassemble(w.instruction) if disassemble else ""
        rows.append(
            (
                str(w.id),
                str(w.start_cycle),
                str(w.end_cycle),
                f"{w.instruction:0{instr_hex_digits}X}",
                readable,
            )
        )
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
              for i in range(5)]
    lines = [
        " | ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
        "-+-".join("-" * widths[i] for i in range(5)),
    ]
    for r in rows:
        lines.append(" | ".join(r[i].ljust(widths[i]) for i in range(5)))
    return "\n".join(lines) + "\n"
