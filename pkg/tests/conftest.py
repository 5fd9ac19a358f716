from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spechound.fixtures import ToyCpu, load_listing1, load_toycpu
from spechound.ifg import Ifg, build_ifg
from spechound.pdlc import Classification, PathLimits, PdlcResult, classify_registers, extract_pdlc
from spechound.sim import Schedule, compile_design


@dataclass
class CpuBundle:
    cpu: ToyCpu
    schedule: Schedule
    ifg: Ifg
    classification: Classification
    pdlc: PdlcResult

    @property
    def design(self):
        return self.cpu.design

    @property
    def mem_layouts(self):
        return {
            n: (s.width, s.depth)
            for n, s in self.design.signals.items()
            if s.kind == "mem"
        }


@pytest.fixture(scope="session")
def listing1_design():
    return load_listing1()


@pytest.fixture(scope="session")
def toycpu() -> CpuBundle:
    cpu = load_toycpu()
    schedule = compile_design(cpu.design)
    ifg = build_ifg(cpu.design)
    classification = classify_registers(ifg, cpu.arch_manifest)
    pdlc = extract_pdlc(ifg, classification.arch, classification.microarch, PathLimits())
    return CpuBundle(cpu, schedule, ifg, classification, pdlc)
