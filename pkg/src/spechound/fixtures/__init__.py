"""Shipped design fixtures and their manifests."""

from __future__ import annotations

import importlib.resources as _res
from dataclasses import dataclass

from ..netlist import Design, load_design
from ..sim.simulator import RetireManifest
from ..trace import IndicatorManifest
from ..pdlc import RegisterManifest

TOYCPU_HALT_SIGNAL = "cpu.halt"
TOYCPU_IMEM = "cpu.imem"


def fixture_path(name: str) -> str:
    return str(_res.files(__package__) / name)


def load_listing1() -> Design:
    return load_design(fixture_path("listing1.ntl"))


@dataclass
class ToyCpu:
    design: Design
    arch_manifest: RegisterManifest
    indicators: IndicatorManifest
    retire: RetireManifest
    halt_signal: str = TOYCPU_HALT_SIGNAL
    program_memory: str = TOYCPU_IMEM


def load_toycpu() -> ToyCpu:
    return ToyCpu(
        design=load_design(fixture_path("toycpu.ntl")),
        arch_manifest=RegisterManifest.load(fixture_path("toycpu_arch.json")),
        indicators=IndicatorManifest.load(fixture_path("toycpu_indicators.json")),
        retire=RetireManifest.load(fixture_path("toycpu_retire.json")),
    )
