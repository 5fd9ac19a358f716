from __future__ import annotations

import fnmatch
import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import forward_enumerate_paths, random_labeled_dag
from spechound.ifg import Ifg, IfgVertex, build_ifg
from spechound.pdlc import (
    ManifestError,
    PathLimits,
    RegisterManifest,
    classify_registers,
    export_pdlc,
    extract_pdlc,
    import_pdlc,
    validate_paths,
)


def _graph(kinds, edges):
    vertices = {n: IfgVertex(n, 1, k) for n, k in kinds.items()}
    return Ifg(vertices, {e: "assignment" for e in edges})


def test_classify_toycpu_matches_independent_glob(toycpu):
    cls = toycpu.classification
    stateful = {
        n for n, s in toycpu.design.signals.items() if s.kind in ("reg", "mem")
    }
    expected_arch = set()
    for pat in toycpu.cpu.arch_manifest.arch_patterns:
        expected_arch |= set(fnmatch.filter(sorted(toycpu.design.signals), pat))
    assert set(cls.arch) == expected_arch
    assert set(cls.microarch) == stateful - expected_arch
    assert not (cls.arch & cls.microarch)
    assert cls.arch | cls.microarch == stateful


def test_empty_manifest_all_registers_micro(toycpu):
    cls = classify_registers(toycpu.ifg, RegisterManifest(()))
    assert cls.arch == frozenset()
    stateful = toycpu.ifg.stateful_vertices()
    assert set(cls.microarch) == stateful


def test_classify_register_ok_wire_rejected(listing1_design):
    ifg = build_ifg(listing1_design)
    cls = classify_registers(ifg, RegisterManifest(("top.q1",)))
    assert set(cls.arch) == {"top.q1"}
    with pytest.raises(ManifestError):
        classify_registers(ifg, RegisterManifest(("top.o",)))


def test_zero_match_pattern_warns(toycpu):
    cls = classify_registers(
        toycpu.ifg, RegisterManifest(("cpu.pc", "cpu.does_not_exist_*"))
    )
    assert any("does_not_exist" in w for w in cls.warnings)
    assert set(cls.arch) == {"cpu.pc"}


def test_single_chain():
    g = _graph({"u": "reg", "w": "wire", "a": "reg"}, [("u", "w"), ("w", "a")])
    res = extract_pdlc(g, frozenset({"a"}), frozenset({"u"}))
    assert [p.chain for p in res.paths] == [("u", "w", "a")]
    assert not res.truncated


def test_diamond_two_paths_equal_forward_oracle():
    kinds = {"u": "reg", "x": "wire", "y": "wire", "a": "reg"}
    edges = [("u", "x"), ("u", "y"), ("x", "a"), ("y", "a")]
    g = _graph(kinds, edges)
    arch, micro = frozenset({"a"}), frozenset({"u"})
    res = extract_pdlc(g, arch, micro)
    assert len(res.paths) == 2
    assert {p.chain for p in res.paths} == forward_enumerate_paths(g, arch, micro)


def test_random_dags_reverse_equals_forward():
    rng = random.Random(20240809)
    for _ in range(30):
        g, arch, micro = random_labeled_dag(rng, max_vertices=60, max_edges=180)
        res = extract_pdlc(g, arch, micro, PathLimits(max_len=64, max_paths=10**6))
        assert not res.truncated
        assert {p.chain for p in res.paths} == forward_enumerate_paths(g, arch, micro)


def test_listing1_single_channel(listing1_design):
    ifg = build_ifg(listing1_design)
    arch = frozenset({"top.q1"})
    micro = frozenset({"top.df1.q", "top.df2.q"})
    res = extract_pdlc(ifg, arch, micro)
    assert [p.chain for p in res.paths] == [("top.df1.q", "top.q1")]


def test_paths_validate_edge_by_edge(toycpu):
    validate_paths(
        toycpu.pdlc, toycpu.ifg,
        toycpu.classification.arch, toycpu.classification.microarch,
    )


def test_extraction_deterministic(toycpu):
    again = extract_pdlc(
        toycpu.ifg, toycpu.classification.arch, toycpu.classification.microarch,
        PathLimits(),
    )
    assert [p.chain for p in again.paths] == [p.chain for p in toycpu.pdlc.paths]
    assert export_pdlc(again) == export_pdlc(toycpu.pdlc)


def test_length_limit_truncates():
    g = _graph(
        {"u": "reg", "w1": "wire", "w2": "wire", "a": "reg"},
        [("u", "w1"), ("w1", "w2"), ("w2", "a")],
    )
    arch, micro = frozenset({"a"}), frozenset({"u"})
    full = extract_pdlc(g, arch, micro)
    assert len(full.paths) == 1 and not full.truncated
    limited = extract_pdlc(g, arch, micro, PathLimits(max_len=3, max_paths=10))
    assert limited.paths == []
    assert limited.truncated


def test_path_cap_truncates():
    kinds = {"u": "reg", "a": "reg", "x": "wire", "y": "wire"}
    edges = [("u", "x"), ("u", "y"), ("x", "a"), ("y", "a")]
    g = _graph(kinds, edges)
    res = extract_pdlc(g, frozenset({"a"}), frozenset({"u"}), PathLimits(max_len=8, max_paths=1))
    assert len(res.paths) == 1
    assert res.truncated


def test_empty_arch_set_warns():
    g = _graph({"u": "reg"}, [])
    res = extract_pdlc(g, frozenset(), frozenset({"u"}))
    assert res.paths == []
    assert res.warnings


def test_export_import_round_trip(toycpu):
    text = export_pdlc(toycpu.pdlc)
    again = import_pdlc(text)
    assert [p.chain for p in again.paths] == [p.chain for p in toycpu.pdlc.paths]
    assert again.limits == toycpu.pdlc.limits
    corrupted = text.replace(toycpu.pdlc.paths[0].id, "0" * 16, 1)
    with pytest.raises(ValueError):
        import_pdlc(corrupted)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_property_reverse_equals_forward(seed):
    rng = random.Random(seed)
    g, arch, micro = random_labeled_dag(rng, max_vertices=40, max_edges=120)
    res = extract_pdlc(g, arch, micro, PathLimits(max_len=64, max_paths=10**6))
    assert not res.truncated
    assert {p.chain for p in res.paths} == forward_enumerate_paths(g, arch, micro)
