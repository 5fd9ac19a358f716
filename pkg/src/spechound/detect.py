"""Direct-leakage detection: decide whether a misspeculated window changed
architectural state beyond what its own retirement stream explains, and
attribute root causes through the channel list.

No golden model: the retirement log is the core's own commit record, and the
channel list only attributes causes, it does not define leaks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .pdlc import PdlcPath
from .sim.simulator import RetireRecord
from .trace import MisspecWindow, WindowDiff

CWE_TAG = "CWE-1342"


@dataclass
class LeakedRegister:
    name: str
    before: int
    after: int
    unexplained_elements: List[int] = field(default_factory=list)  # memories


@dataclass
class LeakReport:
    window: MisspecWindow
    leaked_regs: List[LeakedRegister]
    root_causes: List[str]  # PdlcPath ids
    unexplained: bool  # no channel explains at least one leaked register
    cwe_tag: str = CWE_TAG

    def leaked_names(self) -> List[str]:
        return [l.name for l in self.leaked_regs]

    def to_dict(self) -> dict:
        return {
            "window": {
                "id": self.window.id,
                "start": self.window.start_cycle,
                "end": self.window.end_cycle,
                "instruction": f"{self.window.instruction:04X}",
                "mispredicted": self.window.mispredicted,
            },
            "leaked_regs": [
                {
                    "name": l.name,
                    "before": f"{l.before:x}",
                    "after": f"{l.after:x}",
                    **(
                        {"unexplained_elements": l.unexplained_elements}
                        if l.unexplained_elements
                        else {}
                    ),
                }
                for l in self.leaked_regs
            ],
            "root_causes": self.root_causes,
            "unexplained": self.unexplained,
            "cwe": self.cwe_tag,
        }


def _element_values(value: int, width: int, depth: int) -> List[int]:
    mask = (1 << width) - 1
    return [(value >> (i * width)) & mask for i in range(depth)]


def detect_leaks(
    diff: WindowDiff,
    win: MisspecWindow,
    retire_log: Sequence[RetireRecord],
    pdlc: Sequence[PdlcPath],
    mem_layouts: Dict[str, Tuple[int, int]],
    settle: int,
) -> Optional[LeakReport]:
    """Subtract retirement-explained writes from the architectural
    discrepancies of *win*; report whatever remains.

    *mem_layouts* maps memory signal name -> (element width, depth) so that
    memory-vector diffs can be matched element-by-element against logged
    writes like ``name[i]``.  A write explains a change when its target and
    final new value match the after-snapshot.
    """
    if diff.window_id != win.id:
        raise ValueError(
            f"diff belongs to window {diff.window_id}, not window {win.id}"
        )
    if not win.mispredicted:
        raise ValueError(f"window {win.id} was correctly predicted")

    lo, hi = win.start_cycle, win.end_cycle + settle
    final_write: Dict[str, int] = {}
    for rec in retire_log:
        if lo <= rec.cycle <= hi:
            for wr in rec.writes:
                final_write[wr["reg"]] = wr["new"]

    leaked: List[LeakedRegister] = []
    for name in sorted(diff.arch):
        before, after = diff.arch[name]
        if name in mem_layouts:
            width, depth = mem_layouts[name]
            before_el = _element_values(before, width, depth)
            after_el = _element_values(after, width, depth)
            bad = []
            for i in range(depth):
                if before_el[i] == after_el[i]:
                    continue
                if final_write.get(f"{name}[{i}]") != after_el[i]:
                    bad.append(i)
            if bad:
                leaked.append(LeakedRegister(name, before, after, bad))
        else:
            if final_write.get(name) != after:
                leaked.append(LeakedRegister(name, before, after))

    if not leaked:
        return None

    leaked_names = {l.name for l in leaked}
    root_causes = sorted(
        p.id for p in pdlc if p.sink in leaked_names and p.source in diff.micro
    )
    return LeakReport(
        window=win,
        leaked_regs=leaked,
        root_causes=root_causes,
        unexplained=not root_causes,
    )


def reports_to_json(input_id: str, reports: Sequence[LeakReport]) -> str:
    doc = {
        "format_version": 1,
        "input_id": input_id,
        "windows": [r.to_dict() for r in reports],
        "cwe": CWE_TAG,
    }
    return json.dumps(doc, indent=2) + "\n"
