"""Per-cycle waveforms: in-memory change lists plus VCD interchange.

Waveforms store one value-change list per signal keyed by clock cycle (VCD
time units == cycles, one timestamp per cycle).  Memories appear as single
wide vectors (element i occupies bits [i*width, (i+1)*width)), which keeps
snapshot diffing exact and the VCD subset standard.
"""

from __future__ import annotations

import io
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple


class VcdError(Exception):
    pass


class VcdHeaderError(VcdError):
    pass


class VcdUnknownCode(VcdError):
    pass


class VcdTimeError(VcdError):
    pass


class VcdBaselineError(VcdError):
    """A value change appeared before the $dumpvars baseline."""


@dataclass
class Waveform:
    widths: Dict[str, int]
    kinds: Dict[str, str]  # "reg" or "wire" (VCD var type)
    changes: Dict[str, List[Tuple[int, int]]]  # name -> [(cycle, value)], sorted
    max_cycle: int

    # -- construction --------------------------------------------------------
    @classmethod
    def empty(cls, widths: Dict[str, int], kinds: Optional[Dict[str, str]] = None):
        kinds = kinds or {}
        return cls(
            dict(widths),
            {n: kinds.get(n, "wire") for n in widths},
            {n: [] for n in widths},
            -1,
        )

    def record(self, cycle: int, name: str, value: int) -> None:
        """Append a change; cycles must be recorded in nondecreasing order."""
        lst = self.changes[name]
        if lst and lst[-1][0] == cycle:
            lst[-1] = (cycle, value)
        else:
            lst.append((cycle, value))
        if cycle > self.max_cycle:
            self.max_cycle = cycle

    def close(self, cycle: int) -> None:
        if cycle > self.max_cycle:
            self.max_cycle = cycle

    # -- queries --------------------------------------------------------------
    def value_at(self, name: str, cycle: int) -> int:
        lst = self.changes[name]
        i = bisect_right(lst, (cycle, float("inf")))
        if i == 0:
            return 0
        return lst[i - 1][1]

    def snapshot(self, cycle: int) -> Dict[str, int]:
        """Complete signal valuation at *cycle* (reconstruction is O(changes))."""
        if not (0 <= cycle <= self.max_cycle):
            raise IndexError(f"cycle {cycle} outside trace [0, {self.max_cycle}]")
        return {n: self.value_at(n, cycle) for n in self.widths}

    def count_toggles(self, name: str, start: int, end: int) -> int:
        """Bit toggles of *name* over transitions into cycles (start, end]."""
        lst = self.changes[name]
        if not lst:
            return 0
        total = 0
        prev = self.value_at(name, start)
        i = bisect_right(lst, (start, float("inf")))
        while i < len(lst) and lst[i][0] <= end:
            v = lst[i][1]
            total += (v ^ prev).bit_count()
            prev = v
            i += 1
        return total

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        if self.widths != other.widths or self.max_cycle != other.max_cycle:
            return False
        # equality is value equality at every cycle, not change-list identity
        for n in self.widths:
            a = _normalize(self.changes[n])
            b = _normalize(other.changes[n])
            if a != b:
                return False
        return True


def _normalize(lst: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
    out: List[Tuple[int, int]] = []
    prev = 0
    for c, v in lst:
        if v != prev:
            out.append((c, v))
            prev = v
    return out


# -- VCD identifier codes -----------------------------------------------------

_ID_FIRST, _ID_LAST = 33, 126  # printable ASCII per IEEE-1364


def _id_code(index: int) -> str:
    span = _ID_LAST - _ID_FIRST + 1
    out = []
    index += 1
    while index > 0:
        index -= 1
        out.append(chr(_ID_FIRST + index % span))
        index //= span
    return "".join(out)


# -- writer --------------------------------------------------------------------

def write_vcd(w: Waveform, fileobj, comment: str = "spechound") -> None:
    """Emit the waveform as VCD: $var declarations from dotted-name scopes,
    a $dumpvars baseline at #0, then one timestamp per clock cycle."""
    names = sorted(w.widths)
    codes = {n: _id_code(i) for i, n in enumerate(names)}

    fileobj.write(f"$comment {comment} $end\n")
    fileobj.write("$timescale 1ns $end\n")

    scope_stack: List[str] = []

    def emit_scope(parts: List[str]):
        nonlocal scope_stack
        common = 0
        while (
            common < len(scope_stack)
            and common < len(parts)
            and scope_stack[common] == parts[common]
        ):
            common += 1
        while len(scope_stack) > common:
            scope_stack.pop()
            fileobj.write("$upscope $end\n")
        for p in parts[common:]:
            scope_stack.append(p)
            fileobj.write(f"$scope module {p} $end\n")

    for n in names:
        *scopes, leaf = n.split(".")
        emit_scope(scopes)
        var_type = "reg" if w.kinds.get(n) == "reg" else "wire"
        fileobj.write(f"$var {var_type} {w.widths[n]} {codes[n]} {leaf} $end\n")
    emit_scope([])
    fileobj.write("$enddefinitions $end\n")

    def fmt(n: str, v: int) -> str:
        if w.widths[n] == 1:
            return f"{v}{codes[n]}"
        return f"b{v:b} {codes[n]}"

    fileobj.write("#0\n$dumpvars\n")
    for n in names:
        fileobj.write(fmt(n, w.value_at(n, 0)) + "\n")
    fileobj.write("$end\n")

    pending: Dict[str, int] = {}
    index: Dict[str, int] = {}
    for n in names:
        lst = w.changes[n]
        i = bisect_right(lst, (0, float("inf")))
        index[n] = i
    for cycle in range(1, w.max_cycle + 1):
        fileobj.write(f"#{cycle}\n")
        for n in names:
            lst = w.changes[n]
            i = index[n]
            while i < len(lst) and lst[i][0] == cycle:
                fileobj.write(fmt(n, lst[i][1]) + "\n")
                i += 1
            index[n] = i


def dump_vcd(w: Waveform, path, comment: str = "spechound") -> None:
    with open(path, "w", encoding="ascii") as f:
        write_vcd(w, f, comment)


# -- parser ---------------------------------------------------------------------

def parse_vcd(fileobj) -> Waveform:
    """Parse the VCD subset back into a Waveform.

    Distinct failures: VcdHeaderError (malformed declarations),
    VcdUnknownCode (change for an undeclared identifier code),
    VcdTimeError (non-monotonic timestamps),
    VcdBaselineError (value change before the $dumpvars baseline).
    """
    tokens = fileobj.read().split()
    i = 0
    n_tok = len(tokens)

    def next_tok() -> str:
        nonlocal i
        if i >= n_tok:
            raise VcdHeaderError("unexpected end of file")
        t = tokens[i]
        i += 1
        return t

    scope: List[str] = []
    widths: Dict[str, int] = {}
    kinds: Dict[str, str] = {}
    by_code: Dict[str, str] = {}

    # declarations
    while True:
        if i >= n_tok:
            raise VcdHeaderError("missing $enddefinitions")
        t = next_tok()
        if t == "$enddefinitions":
            if next_tok() != "$end":
                raise VcdHeaderError("$enddefinitions not terminated by $end")
            break
        if t == "$scope":
            kind = next_tok()
            name = next_tok()
            if next_tok() != "$end":
                raise VcdHeaderError("$scope not terminated by $end")
            scope.append(name)
        elif t == "$upscope":
            if not scope:
                raise VcdHeaderError("$upscope without open scope")
            if next_tok() != "$end":
                raise VcdHeaderError("$upscope not terminated by $end")
            scope.pop()
        elif t == "$var":
            var_type = next_tok()
            try:
                width = int(next_tok())
            except ValueError as e:
                raise VcdHeaderError("non-numeric $var width") from e
            code = next_tok()
            name_parts = []
            while True:
                nt = next_tok()
                if nt == "$end":
                    break
                name_parts.append(nt)
            if not name_parts:
                raise VcdHeaderError("$var without a name")
            leaf = name_parts[0]  # strip any trailing "[msb:0]" token
            full = ".".join(scope + [leaf])
            widths[full] = width
            kinds[full] = "reg" if var_type == "reg" else "wire"
            by_code[code] = full
        elif t.startswith("$"):
            # $comment/$date/$timescale/$version blocks: skip to $end
            while next_tok() != "$end":
                pass
        else:
            raise VcdHeaderError(f"unexpected token {t!r} in declarations")

    w = Waveform.empty(widths, kinds)
    current_time: Optional[int] = None
    baseline_seen = False
    in_dump = False

    def apply_change(code: str, value: int):
        if code not in by_code:
            raise VcdUnknownCode(f"value change for unknown identifier code {code!r}")
        if not baseline_seen and not in_dump:
            raise VcdBaselineError(
                "value change before the $dumpvars baseline"
            )
        cycle = current_time if current_time is not None else 0
        w.record(cycle, by_code[code], value)

    while i < n_tok:
        t = next_tok()
        if t.startswith("#"):
            try:
                ts = int(t[1:])
            except ValueError as e:
                raise VcdTimeError(f"malformed timestamp {t!r}") from e
            if current_time is not None and ts <= current_time:
                raise VcdTimeError(
                    f"non-monotonic timestamp #{ts} after #{current_time}"
                )
            current_time = ts
            w.close(ts)
        elif t == "$dumpvars":
            in_dump = True
        elif t == "$end":
            if in_dump:
                in_dump = False
                baseline_seen = True
        elif t[0] in "01":
            apply_change(t[1:], int(t[0]))
        elif t[0] in "bB":
            code = next_tok()
            try:
                value = int(t[1:], 2)
            except ValueError as e:
                raise VcdError(f"malformed binary value {t!r}") from e
            apply_change(code, value)
        elif t[0] in "xXzZ":
            raise VcdError("x/z values are not supported (two-valued logic only)")
        else:
            raise VcdError(f"unexpected token {t!r} in value-change section")

    if not baseline_seen and any(w.changes.values()):
        raise VcdBaselineError("no $dumpvars baseline found")
    if current_time is None:
        w.close(0)
    return w


def load_vcd(path) -> Waveform:
    with open(path, "r", encoding="ascii") as f:
        return parse_vcd(f)


def parse_vcd_text(text: str) -> Waveform:
    return parse_vcd(io.StringIO(text))
