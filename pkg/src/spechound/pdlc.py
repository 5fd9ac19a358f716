"""Potential direct leakage channel extraction.

A channel is a simple flow-graph path from a microarchitectural register to an
architectural register whose interior vertices are all combinational (wires or
ports).  Enumeration runs depth-first over the *reversed* graph starting from
each architectural register, so the cost is driven by the architectural
register count and their combinational fan-in cones rather than by all
(source, sink) pairs; a branch stops as soon as it reaches any stateful
vertex.  Paths are cut at the first architectural sink.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .ifg import Ifg
from .netlist.design import STATEFUL_KINDS


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class RegisterManifest:
    """Glob patterns over hierarchical names selecting architectural registers."""

    arch_patterns: Tuple[str, ...]
    notes: Tuple[str, ...] = ()

    @classmethod
    def from_json(cls, text: str) -> "RegisterManifest":
        doc = json.loads(text)
        pats = doc.get("arch_patterns")
        if not isinstance(pats, list) or not all(isinstance(p, str) for p in pats):
            raise ManifestError("manifest must contain an 'arch_patterns' string list")
        return cls(tuple(pats), tuple(doc.get("notes", [])))

    @classmethod
    def load(cls, path) -> "RegisterManifest":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())


@dataclass
class Classification:
    arch: FrozenSet[str]
    microarch: FrozenSet[str]
    warnings: List[str] = field(default_factory=list)


def classify_registers(ifg: Ifg, manifest: RegisterManifest) -> Classification:
    """Partition stateful vertices into architectural / microarchitectural.

    A pattern that matches nothing yields a warning; a pattern that matches a
    non-stateful vertex (wire or port) is an error.
    """
    stateful = ifg.stateful_vertices()
    arch: Set[str] = set()
    warnings: List[str] = []
    names = sorted(ifg.vertices)
    for pat in manifest.arch_patterns:
        matched = fnmatch.filter(names, pat)
        if not matched:
            warnings.append(f"pattern '{pat}' matches no signal")
            continue
        bad = [m for m in matched if m not in stateful]
        if bad:
            raise ManifestError(
                f"pattern '{pat}' matches non-register signal(s): {bad[:5]}"
            )
        arch.update(matched)
    micro = stateful - arch
    return Classification(frozenset(arch), frozenset(micro), warnings)


@dataclass(frozen=True)
class PathLimits:
    max_len: int = 32  # maximum chain length in signals
    max_paths: int = 1_000_000  # global cap on emitted paths

    def __post_init__(self):
        if self.max_len < 2:
            raise ValueError("max_len must be >= 2")
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")


def chain_id(chain: Sequence[str]) -> str:
    return hashlib.sha256("/".join(chain).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PdlcPath:
    source: str
    sink: str
    chain: Tuple[str, ...]
    id: str

    @classmethod
    def from_chain(cls, chain: Sequence[str]) -> "PdlcPath":
        chain = tuple(chain)
        return cls(chain[0], chain[-1], chain, chain_id(chain))


@dataclass
class PdlcResult:
    paths: List[PdlcPath]
    truncated: bool
    limits: PathLimits
    warnings: List[str] = field(default_factory=list)

    def ids(self) -> Set[str]:
        return {p.id for p in self.paths}

    def by_id(self) -> Dict[str, PdlcPath]:
        return {p.id: p for p in self.paths}


def extract_pdlc(
    ifg: Ifg,
    arch: FrozenSet[str],
    microarch: FrozenSet[str],
    limits: Optional[PathLimits] = None,
) -> PdlcResult:
    """Enumerate all channels by reverse DFS from each architectural register.

    Deterministic: neighbors visit in sorted order, output sorted by
    (sink, source, length, chain).  Hitting max_len or max_paths sets the
    truncated flag instead of raising.
    """
    limits = limits or PathLimits()
    if arch & microarch:
        raise ValueError("arch and microarch sets must be disjoint")
    warnings: List[str] = []
    if not arch:
        warnings.append("empty architectural register set: no channels to extract")
        return PdlcResult([], False, limits, warnings)

    preds = ifg.predecessors()
    stateful = ifg.stateful_vertices()
    chains: Set[Tuple[str, ...]] = set()
    truncated = False

    for sink in sorted(arch):
        # path grows backwards: path[0] == sink, path[-1] == current frontier
        path: List[str] = [sink]
        on_path: Set[str] = {sink}
        # stack of iterators over predecessors
        stack = [iter(preds[sink])]
        while stack:
            if len(chains) >= limits.max_paths:
                truncated = True
                break
            try:
                v = next(stack[-1])
            except StopIteration:
                stack.pop()
                on_path.discard(path.pop())
                continue
            if v in on_path:
                continue  # keep paths simple
            if v in microarch:
                chains.add(tuple(reversed(path + [v])))
                continue  # a stateful vertex ends the branch
            if v in stateful:  # an architectural register cannot be interior
                continue
            if len(path) + 1 >= limits.max_len:
                truncated = True
                continue
            path.append(v)
            on_path.add(v)
            stack.append(iter(preds[v]))
        if len(chains) >= limits.max_paths:
            truncated = True
            break

    paths = [PdlcPath.from_chain(c) for c in chains]
    paths.sort(key=lambda p: (p.sink, p.source, len(p.chain), p.chain))
    return PdlcResult(paths, truncated, limits, warnings)


def export_pdlc(result: PdlcResult) -> str:
    doc = {
        "format_version": 1,
        "paths": [
            {"id": p.id, "source": p.source, "sink": p.sink, "chain": list(p.chain)}
            for p in result.paths
        ],
        "truncated": result.truncated,
        "limits": {"max_len": result.limits.max_len, "max_paths": result.limits.max_paths},
        "warnings": result.warnings,
    }
    return json.dumps(doc, indent=2) + "\n"


def import_pdlc(text: str) -> PdlcResult:
    doc = json.loads(text)
    paths = []
    for p in doc["paths"]:
        path = PdlcPath(p["source"], p["sink"], tuple(p["chain"]), p["id"])
        if path.id != chain_id(path.chain):
            raise ValueError(f"path id '{path.id}' does not match its chain")
        paths.append(path)
    lim = PathLimits(doc["limits"]["max_len"], doc["limits"]["max_paths"])
    return PdlcResult(paths, doc["truncated"], lim, list(doc.get("warnings", [])))


def save_pdlc(result: PdlcResult, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(export_pdlc(result))


def load_pdlc(path) -> PdlcResult:
    with open(path, "r", encoding="utf-8") as f:
        return import_pdlc(f.read())


def validate_paths(result: PdlcResult, ifg: Ifg, arch: FrozenSet[str],
                   microarch: FrozenSet[str]) -> None:
    """Check every emitted chain edge-by-edge against the graph invariants."""
    edge_set = ifg.edge_set()
    for p in result.paths:
        if p.source not in microarch:
            raise ValueError(f"path {p.id}: source '{p.source}' is not microarchitectural")
        if p.sink not in arch:
            raise ValueError(f"path {p.id}: sink '{p.sink}' is not architectural")
        if len(set(p.chain)) != len(p.chain):
            raise ValueError(f"path {p.id}: chain repeats a vertex")
        for a, b in zip(p.chain, p.chain[1:]):
            if (a, b) not in edge_set:
                raise ValueError(f"path {p.id}: ({a}, {b}) is not a flow edge")
        for interior in p.chain[1:-1]:
            if interior in arch or interior in microarch:
                raise ValueError(f"path {p.id}: interior '{interior}' is stateful")
