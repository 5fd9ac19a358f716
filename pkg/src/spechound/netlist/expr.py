"""Expression trees shared by the netlist AST and the elaborated design IR.

All values are fixed-width unsigned bit vectors.  Expressions are immutable;
width checking and Python code generation walk the same node set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Optional


class WidthError(ValueError):
    """Raised when an expression's operand widths are inconsistent."""


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Const(Expr):
    value: int
    width: Optional[int] = None  # None = unsized literal, adapts to context


@dataclass(frozen=True)
class Ref(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # "~"
    a: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # one of & | ^ + - == != < << >>
    a: Expr
    b: Expr


@dataclass(frozen=True)
class Mux(Expr):
    cond: Expr
    t: Expr
    f: Expr


@dataclass(frozen=True)
class Concat(Expr):
    parts: tuple  # tuple[Expr, ...], most significant first


@dataclass(frozen=True)
class Slice(Expr):
    a: Expr
    hi: int
    lo: int


@dataclass(frozen=True)
class MemRead(Expr):
    mem: str
    addr: Expr


_ARITH_OPS = ("&", "|", "^", "+", "-")
_CMP_OPS = ("==", "!=", "<")
_SHIFT_OPS = ("<<", ">>")


def _try_width(e: Expr, widths: Mapping[str, int], mems: Mapping[str, tuple]) -> Optional[int]:
    """Bottom-up width of *e*, or None if it is an unsized constant."""
    if isinstance(e, Const):
        return e.width
    return infer_width(e, widths, mems, expected=None)


def infer_width(
    e: Expr,
    widths: Mapping[str, int],
    mems: Mapping[str, tuple],
    expected: Optional[int] = None,
) -> int:
    """Check widths and return the width of *e*.

    *widths* maps signal name -> width; *mems* maps memory name -> (width, depth).
    *expected* is the width imposed by the surrounding context (assignment
    target or a sized sibling operand); unsized constants adopt it.
    """
    if isinstance(e, Const):
        w = e.width if e.width is not None else expected
        if w is None:
            raise WidthError("width of unsized constant cannot be inferred here")
        if e.value < 0 or e.value >= (1 << w):
            raise WidthError(f"constant {e.value} does not fit in {w} bits")
        if expected is not None and w != expected:
            raise WidthError(f"constant width {w} where {expected} expected")
        return w
    if isinstance(e, Ref):
        if e.name not in widths:
            raise WidthError(f"unknown signal '{e.name}'")
        w = widths[e.name]
        if expected is not None and w != expected:
            raise WidthError(f"'{e.name}' is {w} bits where {expected} expected")
        return w
    if isinstance(e, MemRead):
        if e.mem not in mems:
            raise WidthError(f"unknown memory '{e.mem}'")
        infer_width(e.addr, widths, mems, expected=_try_width(e.addr, widths, mems))
        w = mems[e.mem][0]
        if expected is not None and w != expected:
            raise WidthError(f"memory '{e.mem}' element is {w} bits where {expected} expected")
        return w
    if isinstance(e, Unary):
        return infer_width(e.a, widths, mems, expected)
    if isinstance(e, Binary):
        if e.op in _ARITH_OPS:
            w = _try_width(e.a, widths, mems)
            if w is None:
                w = _try_width(e.b, widths, mems)
            if w is None:
                w = expected
            if w is None:
                raise WidthError(f"cannot infer operand width of '{e.op}'")
            infer_width(e.a, widths, mems, expected=w)
            infer_width(e.b, widths, mems, expected=w)
            if expected is not None and w != expected:
                raise WidthError(f"'{e.op}' result is {w} bits where {expected} expected")
            return w
        if e.op in _CMP_OPS:
            w = _try_width(e.a, widths, mems)
            if w is None:
                w = _try_width(e.b, widths, mems)
            if w is None:
                raise WidthError(f"cannot infer operand width of '{e.op}'")
            infer_width(e.a, widths, mems, expected=w)
            infer_width(e.b, widths, mems, expected=w)
            if expected is not None and expected != 1:
                raise WidthError(f"comparison yields 1 bit where {expected} expected")
            return 1
        if e.op in _SHIFT_OPS:
            w = infer_width(e.a, widths, mems, expected)
            amt = _try_width(e.b, widths, mems)
            infer_width(e.b, widths, mems, expected=amt if amt is not None else 32)
            return w
        raise WidthError(f"unknown operator '{e.op}'")
    if isinstance(e, Mux):
        cw = _try_width(e.cond, widths, mems)
        infer_width(e.cond, widths, mems, expected=cw if cw is not None else 1)
        w = _try_width(e.t, widths, mems)
        if w is None:
            w = _try_width(e.f, widths, mems)
        if w is None:
            w = expected
        if w is None:
            raise WidthError("cannot infer width of conditional expression")
        infer_width(e.t, widths, mems, expected=w)
        infer_width(e.f, widths, mems, expected=w)
        if expected is not None and w != expected:
            raise WidthError(f"conditional is {w} bits where {expected} expected")
        return w
    if isinstance(e, Concat):
        total = 0
        for p in e.parts:
            pw = _try_width(p, widths, mems)
            if pw is None:
                raise WidthError("unsized constant inside concatenation")
            total += infer_width(p, widths, mems, expected=pw)
        if expected is not None and total != expected:
            raise WidthError(f"concatenation is {total} bits where {expected} expected")
        return total
    if isinstance(e, Slice):
        aw = _try_width(e.a, widths, mems)
        if aw is None:
            raise WidthError("cannot slice an unsized constant")
        infer_width(e.a, widths, mems, expected=aw)
        if not (0 <= e.lo <= e.hi < aw):
            raise WidthError(f"select [{e.hi}:{e.lo}] out of range for {aw}-bit value")
        w = e.hi - e.lo + 1
        if expected is not None and w != expected:
            raise WidthError(f"select is {w} bits where {expected} expected")
        return w
    raise WidthError(f"unknown expression node {type(e).__name__}")


def operands(e: Expr) -> Iterator[tuple]:
    """Yield ("sig", name) / ("mem", name) for every signal or memory *e* reads.

    Mux conditions, memory addresses and shift amounts all count: anything the
    expression observes can carry information into its value.
    """
    if isinstance(e, Const):
        return
    elif isinstance(e, Ref):
        yield ("sig", e.name)
    elif isinstance(e, MemRead):
        yield ("mem", e.mem)
        yield from operands(e.addr)
    elif isinstance(e, Unary):
        yield from operands(e.a)
    elif isinstance(e, Binary):
        yield from operands(e.a)
        yield from operands(e.b)
    elif isinstance(e, Mux):
        yield from operands(e.cond)
        yield from operands(e.t)
        yield from operands(e.f)
    elif isinstance(e, Concat):
        for p in e.parts:
            yield from operands(p)
    elif isinstance(e, Slice):
        yield from operands(e.a)


def to_text(e: Expr) -> str:
    """Render *e* in source syntax (used by the pretty printer and exports)."""
    if isinstance(e, Const):
        if e.width is None:
            return str(e.value)
        return f"{e.width}'d{e.value}"
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, MemRead):
        return f"{e.mem}[{to_text(e.addr)}]"
    if isinstance(e, Unary):
        return f"(~{to_text(e.a)})"
    if isinstance(e, Binary):
        return f"({to_text(e.a)} {e.op} {to_text(e.b)})"
    if isinstance(e, Mux):
        return f"({to_text(e.cond)} ? {to_text(e.t)} : {to_text(e.f)})"
    if isinstance(e, Concat):
        return "{" + ", ".join(to_text(p) for p in e.parts) + "}"
    if isinstance(e, Slice):
        if e.hi == e.lo:
            return f"{to_text(e.a)}[{e.lo}]"
        return f"{to_text(e.a)}[{e.hi}:{e.lo}]"
    raise TypeError(type(e))


def gen_py(
    e: Expr,
    widths: Mapping[str, int],
    mems: Mapping[str, tuple],
    name_of,
    expected: Optional[int] = None,
) -> str:
    """Generate a Python expression computing *e* (masked to its width).

    *name_of(kind, name)* returns the Python lvalue for a signal or memory.
    """
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Ref):
        return name_of("sig", e.name)
    if isinstance(e, MemRead):
        w, depth = mems[e.mem]
        addr = gen_py(e.addr, widths, mems, name_of)
        return f"{name_of('mem', e.mem)}[({addr}) % {depth}]"
    if isinstance(e, Unary):
        w = infer_width(e, widths, mems, expected)
        return f"((~({gen_py(e.a, widths, mems, name_of, w)})) & {(1 << w) - 1})"
    if isinstance(e, Binary):
        if e.op in _ARITH_OPS:
            w = infer_width(e, widths, mems, expected)
            a = gen_py(e.a, widths, mems, name_of, w)
            b = gen_py(e.b, widths, mems, name_of, w)
            if e.op in ("+", "-"):
                return f"((({a}) {e.op} ({b})) & {(1 << w) - 1})"
            return f"(({a}) {e.op} ({b}))"
        if e.op in _CMP_OPS:
            w = _try_width(e.a, widths, mems) or _try_width(e.b, widths, mems)
            a = gen_py(e.a, widths, mems, name_of, w)
            b = gen_py(e.b, widths, mems, name_of, w)
            return f"(1 if ({a}) {e.op} ({b}) else 0)"
        if e.op in _SHIFT_OPS:
            w = infer_width(e.a, widths, mems, expected)
            a = gen_py(e.a, widths, mems, name_of, w)
            b = gen_py(e.b, widths, mems, name_of)
            if e.op == "<<":
                return f"((({a}) << ({b})) & {(1 << w) - 1})"
            return f"(({a}) >> ({b}))"
        raise WidthError(e.op)
    if isinstance(e, Mux):
        w = infer_width(e, widths, mems, expected)
        c = gen_py(e.cond, widths, mems, name_of)
        t = gen_py(e.t, widths, mems, name_of, w)
        f = gen_py(e.f, widths, mems, name_of, w)
        return f"(({t}) if ({c}) else ({f}))"
    if isinstance(e, Concat):
        parts = []
        shift = 0
        for p in reversed(e.parts):  # least significant last in source order
            pw = infer_width(p, widths, mems, _try_width(p, widths, mems))
            parts.append(f"(({gen_py(p, widths, mems, name_of, pw)}) << {shift})"
                         if shift else f"({gen_py(p, widths, mems, name_of, pw)})")
            shift += pw
        return "(" + " | ".join(parts) + ")"
    if isinstance(e, Slice):
        aw = _try_width(e.a, widths, mems)
        a = gen_py(e.a, widths, mems, name_of, aw)
        w = e.hi - e.lo + 1
        if e.lo == 0:
            return f"(({a}) & {(1 << w) - 1})"
        return f"((({a}) >> {e.lo}) & {(1 << w) - 1})"
    raise TypeError(type(e))
