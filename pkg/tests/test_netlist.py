from __future__ import annotations

import pytest

from spechound.fixtures import fixture_path
from spechound.netlist import (
    CombinationalLoop,
    DuplicateDeclaration,
    MultipleDrivers,
    NetlistSyntaxError,
    NoDriver,
    UndeclaredSignal,
    UnknownModule,
    WidthMismatch,
    elaborate,
    export_design,
    parse_design,
    to_source,
)

LISTING1 = open(fixture_path("listing1.ntl"), encoding="utf-8").read()

LISTING1_SIGNALS = {
    "top.q1", "top.clk", "top.i", "top.o",
    "top.df1.d", "top.df1.q", "top.df1.clk",
    "top.df2.d", "top.df2.clk", "top.df2.q",
}


def test_parse_listing1_structure():
    src = parse_design(LISTING1)
    assert len(src.modules) == 2
    top = src.module("top")
    assert [inst.module for inst in top.instances] == ["D_FF", "D_FF"]
    assert [inst.name for inst in top.instances] == ["df1", "df2"]
    dff = src.module("D_FF")
    assert [p.name for p in dff.ports] == ["d", "clk", "q"]


def test_parse_minimal_module():
    src = parse_design("module m(input clk, input i, output o); assign o = i; endmodule")
    assert len(src.modules) == 1
    m = src.modules[0]
    assert len(m.ports) == 3
    assert len(m.assigns) == 1


def test_missing_endmodule_reports_line():
    broken = LISTING1.replace("endmodule\nmodule top", "module top", 1)
    with pytest.raises(NetlistSyntaxError) as exc:
        parse_design(broken)
    assert "line" in str(exc.value)


def test_elaborate_listing1_signal_names(listing1_design):
    assert set(listing1_design.signals) == LISTING1_SIGNALS
    kinds = {n: s.kind for n, s in listing1_design.signals.items()}
    assert kinds["top.q1"] == "reg"  # declared reg, fed by an instance output
    assert kinds["top.df1.q"] == "reg"
    assert kinds["top.i"] == "input"
    assert kinds["top.o"] == "output"
    assert kinds["top.df1.d"] == "wire"


def test_combinational_loop_reports_cycle():
    src = """
    module m(input clk, output o);
      wire a;
      wire b;
      assign a = b;
      assign b = a;
      assign o = a;
    endmodule
    """
    with pytest.raises(CombinationalLoop) as exc:
        elaborate(parse_design(src))
    assert set(exc.value.cycle) == {"m.a", "m.b"}


def test_three_level_hierarchy_flattening():
    src = """
    module leaf(input clk, input d, output q);
      reg q;
      always @(posedge clk) q <= d;
    endmodule
    module mid(input clk, input d, output q);
      leaf leaf(.clk(clk), .d(d), .q(q));
    endmodule
    module top(input clk, input i, output o);
      mid mid(.clk(clk), .d(i), .q(o));
    endmodule
    """
    design = elaborate(parse_design(src))
    regs = [n for n, s in design.signals.items() if s.kind == "reg"]
    assert regs == ["top.mid.leaf.q"]
    assert len(design.reg_assigns) == 1


def test_pretty_print_round_trip():
    for source in (LISTING1, open(fixture_path("toycpu.ntl"), encoding="utf-8").read()):
        first = parse_design(source)
        again = parse_design(to_source(first))
        assert first == again


def test_elaboration_is_deterministic():
    d1 = elaborate(parse_design(LISTING1))
    d2 = elaborate(parse_design(LISTING1))
    assert list(d1.signals) == list(d2.signals)
    assert export_design(d1) == export_design(d2)


def test_port_bindings_become_identity_pairs(listing1_design):
    pairs = set(listing1_design.binding_pairs())
    assert pairs == {
        ("top.i", "top.df1.d"),
        ("top.clk", "top.df1.clk"),
        ("top.df1.q", "top.q1"),
        ("top.q1", "top.df2.d"),
        ("top.clk", "top.df2.clk"),
        ("top.df2.q", "top.o"),
    }


def test_undeclared_signal():
    with pytest.raises(UndeclaredSignal):
        parse_design("module m(input clk, output o); assign o = nothere; endmodule")


def test_duplicate_declaration():
    with pytest.raises(DuplicateDeclaration):
        parse_design("module m(input clk, output o); wire x; wire x; assign o = x; endmodule")


def test_unknown_module():
    src = "module top(input clk, output o); ghost g1(.a(clk), .b(o)); endmodule"
    with pytest.raises(UnknownModule):
        parse_design(src)


def test_width_mismatch_in_assign():
    src = """
    module m(input clk, input [3:0] i, output [7:0] o);
      assign o = i;
    endmodule
    """
    with pytest.raises(WidthMismatch):
        elaborate(parse_design(src))


def test_binding_width_mismatch():
    src = """
    module sub(input [3:0] d, output [3:0] q);
      assign q = d;
    endmodule
    module top(input clk, input [7:0] i, output [3:0] o);
      sub s(.d(i), .q(o));
    endmodule
    """
    with pytest.raises(WidthMismatch):
        elaborate(parse_design(src))


def test_multiple_drivers_rejected():
    src = """
    module m(input clk, input a, input b, output o);
      assign o = a;
      assign o = b;
    endmodule
    """
    with pytest.raises(MultipleDrivers):
        elaborate(parse_design(src))


def test_undriven_wire_rejected():
    src = "module m(input clk, output o); wire x; assign o = x; endmodule"
    with pytest.raises(NoDriver):
        elaborate(parse_design(src))


def test_register_reset_values():
    src = """
    module m(input clk, output o);
      reg r = 1;
      always @(posedge clk) r <= ~r;
      assign o = r;
    endmodule
    """
    design = elaborate(parse_design(src))
    assert design.signals["m.r"].init == 1


def test_memory_declaration_and_dynamic_index():
    src = """
    module m(input clk, input [1:0] addr, input [7:0] din, input we, output [7:0] o);
      reg [7:0] store [0:3];
      always @(posedge clk) begin
        if (we)
          store[addr] <= din;
      end
      assign o = store[addr];
    endmodule
    """
    design = elaborate(parse_design(src))
    sig = design.signals["m.store"]
    assert sig.kind == "mem" and sig.depth == 4 and sig.width == 8
    assert len(design.mem_writes) == 1


def test_dynamic_index_on_non_memory_rejected():
    src = """
    module m(input clk, input [1:0] addr, input [7:0] x, output [7:0] o);
      assign o = x[addr];
    endmodule
    """
    with pytest.raises(UndeclaredSignal):
        elaborate(parse_design(src))
