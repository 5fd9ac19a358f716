"""Hierarchy flattening: SourceDesign -> Design.

Instance port bindings become identity continuous assignments tagged with
`binding` provenance (the flow-graph builder turns each one into exactly one
identity-flow edge).  Always blocks are folded into one next-value expression
per register and one ordered write-port list per memory.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Set, Tuple

from .design import (
    KIND_INPUT,
    KIND_MEM,
    KIND_OUTPUT,
    KIND_REG,
    KIND_WIRE,
    CombAssign,
    Design,
    MemWrite,
    RegAssign,
    Signal,
)
from .errors import (
    ClockDomainError,
    CombinationalLoop,
    MultipleDrivers,
    NetlistError,
    NoDriver,
    UndeclaredSignal,
    UnknownModule,
    WidthMismatch,
)
from .expr import (
    Binary,
    Concat,
    Const,
    Expr,
    MemRead,
    Mux,
    Ref,
    Slice,
    Unary,
    WidthError,
    infer_width,
    operands,
)
from .source import IfStmt, Module, NbAssign, SourceDesign


def find_top(src: SourceDesign) -> Module:
    defined = {m.name for m in src.modules}
    instantiated: Set[str] = set()
    for m in src.modules:
        for inst in m.instances:
            if inst.module not in defined:
                raise UnknownModule(
                    f"module '{inst.module}' instantiated in '{m.name}' is not defined"
                )
            instantiated.add(inst.module)
    tops = [m for m in src.modules if m.name not in instantiated]
    if len(tops) != 1:
        names = ", ".join(m.name for m in tops) or "<none>"
        raise NetlistError(f"expected exactly one top module, found: {names}")
    return tops[0]


def validate_source(src: SourceDesign) -> None:
    """Check SourceDesign invariants that do not need width information:
    one top module, all referenced signals declared, all instances defined."""
    find_top(src)
    for m in src.modules:
        declared = (
            {p.name for p in m.ports}
            | {w.name for w in m.wires}
            | {r.name for r in m.regs}
        )

        def check(name: str, what: str):
            if name not in declared:
                raise UndeclaredSignal(
                    f"{what} '{name}' is not declared in module '{m.name}'"
                )

        def check_expr(e: Expr):
            for kind, name in operands(e):
                check(name, "signal")

        for a in m.assigns:
            check(a.target, "assignment target")
            check_expr(a.expr)
        for blk in m.always:
            check(blk.clock, "clock")
            _walk_stmts(blk.body, [], lambda tgt, idx, rhs, conds: (
                check(tgt, "assignment target"),
                idx is not None and check_expr(idx),
                check_expr(rhs),
                [check_expr(c) for c, _ in conds],
            ))
        for inst in m.instances:
            for port, sig in inst.bindings:
                check(sig, f"binding for '.{port}'")


def _walk_stmts(stmts, conds, visit):
    """Walk an always-block body; *conds* is a list of (expr, polarity)."""
    for s in stmts:
        if isinstance(s, NbAssign):
            visit(s.target, s.target_index, s.expr, list(conds))
        elif isinstance(s, IfStmt):
            _walk_stmts(s.then_body, conds + [(s.cond, True)], visit)
            _walk_stmts(s.else_body, conds + [(s.cond, False)], visit)
        else:
            raise TypeError(type(s))


class _Elaborator:
    def __init__(self, src: SourceDesign):
        self.src = src
        self.modules = {m.name: m for m in src.modules}
        self.signals: Dict[str, Signal] = {}
        self.comb: List[CombAssign] = []
        self.regs: List[RegAssign] = []
        self.memws: List[MemWrite] = []

    # -- naming ------------------------------------------------------------
    def run(self) -> Design:
        validate_source(self.src)
        top = find_top(self.src)
        self._instantiate(top, top.name, is_top=True)
        self._check_widths()
        self._check_drivers()
        clock, aliases = self._resolve_clocks()
        order = _comb_topo_order(self.signals, self.comb, aliases)  # raises on loops
        design = Design(
            top=top.name,
            signals=self.signals,
            comb_assigns=self.comb,
            reg_assigns=self.regs,
            mem_writes=self.memws,
            clock=clock,
            clock_aliases=aliases,
        )
        design._comb_order = order  # cached evaluation order, same check result
        return design

    def _instantiate(self, module: Module, prefix: str, is_top: bool):
        full = lambda n: f"{prefix}.{n}"
        local_kind: Dict[str, Signal] = {}

        reg_names = {r.name: r for r in module.regs}
        for p in module.ports:
            r = reg_names.get(p.name)
            if r is not None:
                if r.depth is not None:
                    raise NetlistError(
                        f"port '{p.name}' of '{module.name}' cannot be a memory"
                    )
                if r.width != p.width:
                    raise WidthMismatch(
                        f"port '{p.name}' of '{module.name}': reg width {r.width} "
                        f"!= port width {p.width}"
                    )
                sig = Signal(full(p.name), p.width, KIND_REG, init=r.init)
            elif is_top:
                sig = Signal(full(p.name), p.width, p.direction)
            else:
                sig = Signal(full(p.name), p.width, KIND_WIRE)
            self.signals[sig.name] = sig
            local_kind[p.name] = sig
        for w in module.wires:
            sig = Signal(full(w.name), w.width, KIND_WIRE)
            self.signals[sig.name] = sig
            local_kind[w.name] = sig
        for r in module.regs:
            if r.name in local_kind:  # port redeclared as reg, already handled
                continue
            kind = KIND_MEM if r.depth is not None else KIND_REG
            sig = Signal(full(r.name), r.width, kind, depth=r.depth, init=r.init)
            self.signals[sig.name] = sig
            local_kind[r.name] = sig

        def qualify(e: Expr) -> Expr:
            if isinstance(e, Const):
                return e
            if isinstance(e, Ref):
                return Ref(full(e.name))
            if isinstance(e, MemRead):
                if e.mem not in local_kind or local_kind[e.mem].kind != KIND_MEM:
                    raise UndeclaredSignal(
                        f"'{e.mem}' in module '{module.name}' is not a memory"
                    )
                return MemRead(full(e.mem), qualify(e.addr))
            if isinstance(e, Unary):
                return Unary(e.op, qualify(e.a))
            if isinstance(e, Binary):
                return Binary(e.op, qualify(e.a), qualify(e.b))
            if isinstance(e, Mux):
                return Mux(qualify(e.cond), qualify(e.t), qualify(e.f))
            if isinstance(e, Concat):
                return Concat(tuple(qualify(p) for p in e.parts))
            if isinstance(e, Slice):
                return Slice(qualify(e.a), e.hi, e.lo)
            raise TypeError(type(e))

        for a in module.assigns:
            self.comb.append(CombAssign(full(a.target), qualify(a.expr), "assign"))

        for blk in module.always:
            self._lower_always(module, blk, full, local_kind, qualify)

        for inst in module.instances:
            child = self.modules[inst.module]
            child_prefix = f"{prefix}.{inst.name}"
            self._instantiate(child, child_prefix, is_top=False)
            child_ports = {p.name: p for p in child.ports}
            bound = set()
            for port, sig in inst.bindings:
                if port not in child_ports:
                    raise NetlistError(
                        f"instance '{inst.name}': module '{child.name}' has no port '{port}'"
                    )
                if port in bound:
                    raise MultipleDrivers(
                        f"instance '{inst.name}': port '{port}' bound twice"
                    )
                bound.add(port)
                p = child_ports[port]
                parent_sig = local_kind[sig]
                if parent_sig.width != p.width:
                    raise WidthMismatch(
                        f"instance '{inst.name}': binding .{port}({sig}) connects "
                        f"{p.width}-bit port to {parent_sig.width}-bit signal"
                    )
                inner = f"{child_prefix}.{port}"
                if p.direction == "input":
                    self.comb.append(CombAssign(inner, Ref(parent_sig.name), "binding"))
                else:
                    self.comb.append(CombAssign(parent_sig.name, Ref(inner), "binding"))
            missing = set(child_ports) - bound
            if missing:
                raise NetlistError(
                    f"instance '{inst.name}': unbound ports {sorted(missing)}"
                )

    def _lower_always(self, module, blk, full, local_kind, qualify):
        clock = full(blk.clock)
        reg_updates: Dict[str, List[Tuple[Optional[Expr], Expr]]] = {}
        order_seen: List[str] = []

        def as_bool(cond: Expr) -> Expr:
            w = infer_width(cond, self._scratch_widths(), self._scratch_mems())
            if w == 1:
                return cond
            return Binary("!=", cond, Const(0, w))

        def conds_to_expr(conds) -> Optional[Expr]:
            acc: Optional[Expr] = None
            for c, polarity in conds:
                b = as_bool(qualify(c))
                if not polarity:
                    b = Unary("~", b)
                acc = b if acc is None else Binary("&", acc, b)
            return acc

        def visit(target, index, rhs, conds):
            sig = local_kind.get(target)
            if sig is None:  # validate_source already rejects; defensive
                raise UndeclaredSignal(target)
            if sig.kind == KIND_MEM:
                if index is None:
                    raise NetlistError(
                        f"memory '{target}' must be written with an index"
                    )
                enable = conds_to_expr(conds) or Const(1, 1)
                self.memws.append(
                    MemWrite(sig.name, enable, qualify(index), qualify(rhs), clock)
                )
                return
            if index is not None:
                raise NetlistError(f"'{target}' is not a memory, cannot index it")
            if sig.kind == KIND_INPUT:
                raise MultipleDrivers(f"cannot assign input port '{target}'")
            if sig.name not in reg_updates:
                reg_updates[sig.name] = []
                order_seen.append(sig.name)
            reg_updates[sig.name].append((conds_to_expr(conds), qualify(rhs)))

        _walk_stmts(blk.body, [], visit)

        for name in order_seen:
            next_expr: Expr = Ref(name)
            for cond, rhs in reg_updates[name]:
                next_expr = rhs if cond is None else Mux(cond, rhs, next_expr)
            self.regs.append(RegAssign(name, next_expr, clock))

    # width tables over everything declared so far (full names)
    def _scratch_widths(self):
        return {s.name: s.width for s in self.signals.values() if s.kind != KIND_MEM}

    def _scratch_mems(self):
        return {
            s.name: (s.width, s.depth)
            for s in self.signals.values()
            if s.kind == KIND_MEM
        }

    def _check_widths(self):
        widths = self._scratch_widths()
        mems = self._scratch_mems()
        for a in self.comb:
            try:
                infer_width(a.expr, widths, mems, expected=widths[a.target])
            except WidthError as e:
                raise WidthMismatch(f"assign {a.target}: {e}") from e
        for r in self.regs:
            try:
                infer_width(r.next_expr, widths, mems, expected=widths[r.target])
            except WidthError as e:
                raise WidthMismatch(f"register {r.target}: {e}") from e
        for w in self.memws:
            try:
                infer_width(w.enable, widths, mems)
                aw = infer_width(w.addr, widths, mems)
                infer_width(w.data, widths, mems, expected=mems[w.mem][0])
            except WidthError as e:
                raise WidthMismatch(f"memory write {w.mem}: {e}") from e

    def _check_drivers(self):
        drivers: Dict[str, List[str]] = {s: [] for s in self.signals}
        for a in self.comb:
            drivers[a.target].append(a.provenance)
        for r in self.regs:
            drivers[r.target].append("clocked")
        for name, sig in self.signals.items():
            n = len(drivers[name])
            if sig.kind == KIND_MEM:
                if n:
                    raise MultipleDrivers(f"memory '{name}' cannot be assigned whole")
                continue
            if sig.kind == KIND_INPUT:
                if n:
                    raise MultipleDrivers(f"input port '{name}' cannot be driven")
                continue
            if n > 1:
                raise MultipleDrivers(
                    f"'{name}' has {n} drivers ({', '.join(drivers[name])})"
                )
            if n == 0:
                raise NoDriver(f"'{name}' ({sig.kind}) has no driver")

    def _resolve_clocks(self) -> Tuple[str, frozenset]:
        identity_src: Dict[str, str] = {}
        for a in self.comb:
            if isinstance(a.expr, Ref):
                identity_src[a.target] = a.expr.name

        def root_of(name: str) -> str:
            seen = set()
            cur = name
            while True:
                if cur in seen:
                    raise ClockDomainError(f"clock '{name}' loops")
                seen.add(cur)
                sig = self.signals[cur]
                if sig.kind == KIND_INPUT:
                    return cur
                if cur in identity_src:
                    cur = identity_src[cur]
                    continue
                raise ClockDomainError(
                    f"clock '{name}' does not trace to a top-level input "
                    f"through identity connections"
                )

        clocks = {r.clock for r in self.regs} | {w.clock for w in self.memws}
        if not clocks:
            return "", frozenset()
        roots = {root_of(c) for c in clocks}
        if len(roots) > 1:
            raise ClockDomainError(f"multiple clock domains: {sorted(roots)}")
        root = roots.pop()
        # every signal that is an identity-copy of the clock root
        aliases = {root}
        changed = True
        while changed:
            changed = False
            for tgt, src_name in identity_src.items():
                if src_name in aliases and tgt not in aliases:
                    aliases.add(tgt)
                    changed = True
        # only pure copies count; a clock alias used in data logic stays a copy
        return root, frozenset(aliases)


def _comb_topo_order(signals, comb_assigns, clock_aliases) -> List[CombAssign]:
    """Topologically order combinational assignments; raise on loops."""
    assigns = [a for a in comb_assigns if a.target not in clock_aliases]
    comb_targets = {a.target for a in assigns}
    deps: Dict[str, Set[str]] = {}
    for a in assigns:
        d = set()
        for kind, name in operands(a.expr):
            if kind == "sig" and name in comb_targets:
                d.add(name)
        deps[a.target] = d
    ordered: List[CombAssign] = []
    done: Set[str] = set()
    by_target = {a.target: a for a in assigns}
    remaining = dict(deps)
    while remaining:
        ready = sorted(t for t, d in remaining.items() if d <= done)
        if not ready:
            cycle = _find_cycle(remaining, done)
            raise CombinationalLoop(cycle)
        for t in ready:
            ordered.append(by_target[t])
            done.add(t)
            del remaining[t]
    return ordered


def _find_cycle(deps: Dict[str, Set[str]], done: Set[str]) -> List[str]:
    start = sorted(deps)[0]
    path: List[str] = []
    seen = set()
    cur = start
    while cur not in seen:
        seen.add(cur)
        path.append(cur)
        nxt = sorted(d for d in deps.get(cur, ()) if d not in done)
        if not nxt:
            break
        cur = nxt[0]
    if cur in path:
        cycle = path[path.index(cur):]
        return sorted(cycle)
    return sorted(path)


def elaborate(src: SourceDesign) -> Design:
    """Flatten *src* into a Design.

    Raises CombinationalLoop (listing the cycle), MultipleDrivers,
    WidthMismatch, ClockDomainError, NoDriver.
    """
    return _Elaborator(src).run()


def comb_evaluation_order(design: Design) -> List[CombAssign]:
    """Dependency-respecting evaluation order of combinational assignments."""
    cached = getattr(design, "_comb_order", None)
    if cached is not None:
        return cached
    return _comb_topo_order(design.signals, design.comb_assigns, design.clock_aliases)
