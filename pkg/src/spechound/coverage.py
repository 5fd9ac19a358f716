"""Coverage metrics guiding the fuzzer.

Leakage-path coverage counts bit toggles of channel signals inside
misspeculated windows: a path is activated in a window when every signal on
its chain toggles at least once within that window.  Per-signal toggle counts
bucket onto a power-of-two ladder so feedback stays bounded but remains
sensitive to repeated activation.  Toggle coverage (whole-trace, all signals)
is the traditional baseline metric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Set

from .pdlc import PdlcPath
from .trace import MisspecWindow
from .waveform import Waveform

BUCKETS = ("1", "2", "3", "4-7", "8-15", "16-31", "32+")

KIND_LP = "lp"
KIND_TOGGLE = "toggle"


def bucket_of(count: int) -> str:
    if count <= 0:
        raise ValueError("bucket_of expects a positive toggle count")
    if count == 1:
        return "1"
    if count == 2:
        return "2"
    if count == 3:
        return "3"
    if count < 8:
        return "4-7"
    if count < 16:
        return "8-15"
    if count < 32:
        return "16-31"
    return "32+"


@dataclass
class CoverageMap:
    kind: str  # KIND_LP or KIND_TOGGLE
    activated_paths: Set[str] = field(default_factory=set)
    signal_buckets: Dict[str, Set[str]] = field(default_factory=dict)
    windows_seen: int = 0

    def add_bucket(self, signal: str, count: int) -> None:
        if count > 0:
            self.signal_buckets.setdefault(signal, set()).add(bucket_of(count))

    def merge(self, other: "CoverageMap") -> "CoverageMap":
        """Union of both maps; commutative, associative and idempotent
        (windows_seen merges with max to preserve idempotence)."""
        if self.kind != other.kind:
            raise ValueError(f"cannot merge '{self.kind}' map with '{other.kind}' map")
        out = CoverageMap(self.kind)
        out.activated_paths = set(self.activated_paths) | set(other.activated_paths)
        for src in (self.signal_buckets, other.signal_buckets):
            for sig, buckets in src.items():
                out.signal_buckets.setdefault(sig, set()).update(buckets)
        out.windows_seen = max(self.windows_seen, other.windows_seen)
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "format_version": 1,
                "kind": self.kind,
                "activated": sorted(self.activated_paths),
                "buckets": {
                    s: sorted(b, key=BUCKETS.index)
                    for s, b in sorted(self.signal_buckets.items())
                },
                "windows_seen": self.windows_seen,
            },
            indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CoverageMap":
        doc = json.loads(text)
        m = cls(doc["kind"])
        m.activated_paths = set(doc["activated"])
        m.signal_buckets = {s: set(b) for s, b in doc["buckets"].items()}
        m.windows_seen = doc["windows_seen"]
        return m


def lp_coverage(
    w: Waveform, windows: Sequence[MisspecWindow], paths: Sequence[PdlcPath]
) -> CoverageMap:
    """Leakage-path coverage of one trace.

    Only mispredicted windows count.  Toggles are transitions into cycles
    (start, end]; every signal on any channel chain is counted.
    """
    cov = CoverageMap(KIND_LP)
    signals: Set[str] = set()
    for p in paths:
        signals.update(p.chain)
    signals &= set(w.widths)
    for win in windows:
        if not win.mispredicted:
            continue
        cov.windows_seen += 1
        counts = {
            s: w.count_toggles(s, win.start_cycle, win.end_cycle) for s in signals
        }
        for s, c in counts.items():
            cov.add_bucket(s, c)
        for p in paths:
            if p.id in cov.activated_paths:
                continue
            if all(counts.get(s, 0) >= 1 for s in p.chain):
                cov.activated_paths.add(p.id)
    return cov


def toggle_coverage(w: Waveform) -> CoverageMap:
    """Whole-trace per-signal toggle buckets (the baseline metric)."""
    cov = CoverageMap(KIND_TOGGLE)
    for s in w.widths:
        cov.add_bucket(s, w.count_toggles(s, 0, w.max_cycle))
    return cov


def is_interesting(new: CoverageMap, accumulated: CoverageMap) -> bool:
    """True when *new* contains an activated path or an occupied
    (signal, bucket) pair absent from *accumulated*."""
    if new.kind != accumulated.kind:
        raise ValueError(
            f"cannot compare '{new.kind}' coverage against '{accumulated.kind}'"
        )
    if new.activated_paths - accumulated.activated_paths:
        return True
    for sig, buckets in new.signal_buckets.items():
        if buckets - accumulated.signal_buckets.get(sig, set()):
            return True
    return False
