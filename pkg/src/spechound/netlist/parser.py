"""Hand-rolled tokenizer and recursive-descent parser for `.ntl` sources."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional

from .errors import DuplicateDeclaration, NetlistSyntaxError
from .expr import Binary, Concat, Const, Expr, MemRead, Mux, Ref, Slice, Unary
from .source import (
    AlwaysBlock,
    ContAssign,
    IfStmt,
    Instance,
    Module,
    NbAssign,
    Port,
    RegDecl,
    SourceDesign,
    WireDecl,
)

KEYWORDS = {
    "module", "endmodule", "input", "output", "wire", "reg",
    "assign", "always", "begin", "end", "if", "else", "posedge",
}

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>//[^\n]*|/\*.*?\*/)
    | (?P<sized>\d+'[bdh][0-9a-fA-F_]+)
    | (?P<num>\d+)
    | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<op><<|>>|<=|==|!=|[()\[\]{},;:.=<+\-~&|^?@])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "id" | "num" | "sized" | "op" | "kw" | "eof"
    text: str
    line: int
    col: int


def tokenize(src: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise NetlistSyntaxError(
                f"unexpected character {src[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind in ("ws", "comment"):
            nl = text.count("\n")
            if nl:
                line += nl
                line_start = pos + text.rfind("\n") + 1
        elif kind == "id":
            tokens.append(Token("kw" if text in KEYWORDS else "id", text, line, col))
        else:
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "<eof>", line, len(src) - line_start + 1))
    return tokens


def _parse_sized_const(text: str, line: int, col: int) -> Const:
    width_txt, rest = text.split("'", 1)
    base = {"b": 2, "d": 10, "h": 16}[rest[0]]
    digits = rest[1:].replace("_", "")
    width = int(width_txt)
    value = int(digits, base)
    if width < 1:
        raise NetlistSyntaxError("constant width must be >= 1", line, col)
    if value >= (1 << width):
        raise NetlistSyntaxError(
            f"constant {text} does not fit in {width} bits", line, col
        )
    return Const(value, width)


class Parser:
    def __init__(self, src: str):
        self.tokens = tokenize(src)
        self.i = 0

    # -- token helpers -----------------------------------------------------
    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise NetlistSyntaxError(f"{msg} (found {tok.text!r})", tok.line, tok.col)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            self.error(f"expected {text or kind}")
        return self.next()

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        t = self.peek()
        if t.kind == kind and (text is None or t.text == text):
            return self.next()
        return None

    # -- grammar -----------------------------------------------------------
    def parse_design(self) -> SourceDesign:
        modules = []
        names = set()
        while self.peek().kind != "eof":
            m = self.parse_module()
            if m.name in names:
                raise DuplicateDeclaration(f"module '{m.name}' defined twice")
            names.add(m.name)
            modules.append(m)
        if not modules:
            self.error("empty source: expected at least one module")
        return SourceDesign(tuple(modules))

    def parse_module(self) -> Module:
        self.expect("kw", "module")
        name = self.expect("id").text
        self.expect("op", "(")
        ports = []
        if not self.accept("op", ")"):
            while True:
                ports.append(self.parse_port())
                if self.accept("op", ")"):
                    break
                self.expect("op", ",")
        self.expect("op", ";")
        wires, regs, assigns, always, instances = [], [], [], [], []
        declared = {p.name for p in ports}

        def declare(nm: str, tok: Token):
            if nm in declared and not _is_port_redecl(nm):
                raise DuplicateDeclaration(
                    f"'{nm}' declared twice in module '{name}' (line {tok.line})"
                )
            declared.add(nm)

        def _is_port_redecl(nm: str) -> bool:
            # `output q; reg q;` marks a port as a register: one redeclaration
            # as reg is allowed, everything else is a duplicate.
            return any(p.name == nm for p in ports) and not any(
                r.name == nm for r in regs
            ) and not any(w.name == nm for w in wires)

        while not self.accept("kw", "endmodule"):
            t = self.peek()
            if t.kind == "eof":
                self.error("missing 'endmodule'")
            if t.kind == "kw" and t.text == "wire":
                self.next()
                width = self.parse_range_opt()
                nm_tok = self.expect("id")
                declare(nm_tok.text, nm_tok)
                wires.append(WireDecl(nm_tok.text, width))
                self.expect("op", ";")
            elif t.kind == "kw" and t.text == "reg":
                self.next()
                width = self.parse_range_opt()
                nm_tok = self.expect("id")
                declare(nm_tok.text, nm_tok)
                depth = None
                init = 0
                if self.accept("op", "["):
                    lo = int(self.expect("num").text)
                    self.expect("op", ":")
                    hi = int(self.expect("num").text)
                    self.expect("op", "]")
                    if lo != 0:
                        self.error("memory range must start at 0", nm_tok)
                    depth = hi + 1
                elif self.accept("op", "="):
                    c = self.parse_const()
                    init = c.value
                    if c.width is not None and c.width != width:
                        self.error(
                            f"reset value width {c.width} != declared width {width}",
                            nm_tok,
                        )
                    if init >= (1 << width):
                        self.error("reset value does not fit declared width", nm_tok)
                regs.append(RegDecl(nm_tok.text, width, depth, init))
                self.expect("op", ";")
            elif t.kind == "kw" and t.text == "assign":
                self.next()
                target = self.expect("id").text
                self.expect("op", "=")
                assigns.append(ContAssign(target, self.parse_expr()))
                self.expect("op", ";")
            elif t.kind == "kw" and t.text == "always":
                always.append(self.parse_always())
            elif t.kind == "id":
                instances.append(self.parse_instance())
            else:
                self.error("expected a module item")
        return Module(
            name,
            tuple(ports),
            tuple(wires),
            tuple(regs),
            tuple(assigns),
            tuple(always),
            tuple(instances),
        )

    def parse_port(self) -> Port:
        t = self.peek()
        if t.kind != "kw" or t.text not in ("input", "output"):
            self.error("expected 'input' or 'output'")
        self.next()
        width = self.parse_range_opt()
        name = self.expect("id").text
        return Port(t.text, name, width)

    def parse_range_opt(self) -> int:
        if not self.accept("op", "["):
            return 1
        t = self.expect("num")
        msb = int(t.text)
        self.expect("op", ":")
        lsb = int(self.expect("num").text)
        self.expect("op", "]")
        if lsb != 0 or msb < 0:
            self.error("vector range must be [msb:0]", t)
        return msb + 1

    def parse_always(self) -> AlwaysBlock:
        self.expect("kw", "always")
        self.expect("op", "@")
        self.expect("op", "(")
        self.expect("kw", "posedge")
        clock = self.expect("id").text
        self.expect("op", ")")
        body = self.parse_stmt()
        return AlwaysBlock(clock, body if isinstance(body, tuple) else (body,))

    def parse_stmt(self):
        """Returns a tuple of statements (begin/end) or a single statement."""
        if self.accept("kw", "begin"):
            body = []
            while not self.accept("kw", "end"):
                if self.peek().kind == "eof":
                    self.error("missing 'end'")
                s = self.parse_stmt()
                body.extend(s) if isinstance(s, tuple) else body.append(s)
            return tuple(body)
        if self.accept("kw", "if"):
            self.expect("op", "(")
            cond = self.parse_expr()
            self.expect("op", ")")
            then_body = self.parse_stmt()
            then_body = then_body if isinstance(then_body, tuple) else (then_body,)
            else_body: tuple = ()
            if self.accept("kw", "else"):
                eb = self.parse_stmt()
                else_body = eb if isinstance(eb, tuple) else (eb,)
            return IfStmt(cond, then_body, else_body)
        target = self.expect("id").text
        index = None
        if self.accept("op", "["):
            index = self.parse_expr()
            self.expect("op", "]")
        self.expect("op", "<=")
        rhs = self.parse_expr()
        self.expect("op", ";")
        return NbAssign(target, rhs, index)

    def parse_instance(self) -> Instance:
        module = self.expect("id").text
        name = self.expect("id").text
        self.expect("op", "(")
        bindings = []
        if not self.accept("op", ")"):
            while True:
                self.expect("op", ".")
                port = self.expect("id").text
                self.expect("op", "(")
                sig = self.expect("id").text
                self.expect("op", ")")
                bindings.append((port, sig))
                if self.accept("op", ")"):
                    break
                self.expect("op", ",")
        self.expect("op", ";")
        return Instance(module, name, tuple(bindings))

    def parse_const(self) -> Const:
        t = self.peek()
        if t.kind == "sized":
            self.next()
            return _parse_sized_const(t.text, t.line, t.col)
        if t.kind == "num":
            self.next()
            return Const(int(t.text), None)
        self.error("expected a constant")

    # -- expressions (precedence: ?: < | < ^ < & < ==/!= < '<' < shifts < +- < unary)
    def parse_expr(self) -> Expr:
        e = self.parse_or()
        if self.accept("op", "?"):
            t = self.parse_expr()
            self.expect("op", ":")
            f = self.parse_expr()
            return Mux(e, t, f)
        return e

    def _binary_level(self, ops, next_level):
        e = next_level()
        while True:
            t = self.peek()
            if t.kind == "op" and t.text in ops:
                self.next()
                e = Binary(t.text, e, next_level())
            else:
                return e

    def parse_or(self):
        return self._binary_level(("|",), self.parse_xor)

    def parse_xor(self):
        return self._binary_level(("^",), self.parse_and)

    def parse_and(self):
        return self._binary_level(("&",), self.parse_eq)

    def parse_eq(self):
        return self._binary_level(("==", "!="), self.parse_rel)

    def parse_rel(self):
        return self._binary_level(("<",), self.parse_shift)

    def parse_shift(self):
        return self._binary_level(("<<", ">>"), self.parse_add)

    def parse_add(self):
        return self._binary_level(("+", "-"), self.parse_unary)

    def parse_unary(self) -> Expr:
        if self.accept("op", "~"):
            return Unary("~", self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        e = self.parse_primary()
        while self.peek().kind == "op" and self.peek().text == "[":
            self.next()
            first = self.parse_expr()
            if self.accept("op", ":"):
                if not isinstance(first, Const):
                    self.error("part-select bounds must be constant")
                lo_tok = self.parse_expr()
                if not isinstance(lo_tok, Const):
                    self.error("part-select bounds must be constant")
                self.expect("op", "]")
                e = Slice(e, first.value, lo_tok.value)
            else:
                self.expect("op", "]")
                if isinstance(first, Const):
                    e = Slice(e, first.value, first.value)
                elif isinstance(e, Ref):
                    # dynamic index: memory read
                    e = MemRead(e.name, first)
                else:
                    self.error("dynamic index is only valid on a memory name")
        return e

    def parse_primary(self) -> Expr:
        t = self.peek()
        if t.kind in ("num", "sized"):
            return self.parse_const()
        if t.kind == "id":
            self.next()
            return Ref(t.text)
        if t.kind == "op" and t.text == "(":
            self.next()
            e = self.parse_expr()
            self.expect("op", ")")
            return e
        if t.kind == "op" and t.text == "{":
            self.next()
            # replication {N{expr}} or plain concatenation {a, b, ...}
            if (
                self.peek().kind in ("num", "sized")
                and self.peek(1).kind == "op"
                and self.peek(1).text == "{"
            ):
                n_tok = self.next()
                count = _parse_sized_const(n_tok.text, n_tok.line, n_tok.col).value \
                    if n_tok.kind == "sized" else int(n_tok.text)
                self.expect("op", "{")
                inner = self.parse_expr()
                self.expect("op", "}")
                self.expect("op", "}")
                if count < 1:
                    self.error("replication count must be >= 1", n_tok)
                return Concat(tuple([inner] * count))
            parts = [self.parse_expr()]
            while self.accept("op", ","):
                parts.append(self.parse_expr())
            self.expect("op", "}")
            return Concat(tuple(parts))
        self.error("expected an expression")


def parse_design(source: str) -> SourceDesign:
    """Parse `.ntl` text into a SourceDesign satisfying its invariants.

    Raises NetlistSyntaxError (with line/column) on malformed input,
    DuplicateDeclaration on name clashes, UndeclaredSignal / UnknownModule
    on dangling references.  Width checks happen at elaboration.
    """
    from .elaborate import validate_source

    design = Parser(source).parse_design()
    validate_source(design)
    return design
