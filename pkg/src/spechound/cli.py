"""Command-line entry point.

Subcommands follow the two-phase pipeline: `ifg build` and `pdlc extract`
(offline), `sim run`, `analyze`, `fuzz` and `report` (online).  Exit codes:
0 success / no leak, 1 usage or input error, 2 leaks found.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, isa
from .coverage import KIND_LP, KIND_TOGGLE
from .detect import detect_leaks, reports_to_json
from .fuzz import CampaignOptions, run_campaign
from .ifg import build_ifg, load_ifg, save_ifg
from .netlist import NetlistError, export_design, load_design
from .pdlc import (
    PathLimits,
    RegisterManifest,
    classify_registers,
    extract_pdlc,
    load_pdlc,
    save_pdlc,
)
from .sim import RetireManifest, SimConfig, compile_design, parse_retire_log, run
from .trace import IndicatorManifest, build_mst, mst_to_json, mst_to_table, window_diff
from .waveform import VcdError, dump_vcd, load_vcd

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_LEAKS = 2


class CliError(Exception):
    pass


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"file not found: {p}")
    return p


def _load_design_checked(path: str):
    return load_design(_existing(path))


def _parse_vuln(text):
    if not text:
        return frozenset()
    return frozenset(x.strip() for x in text.split(",") if x.strip())


def _parse_inputs(pairs):
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise CliError(f"--input expects name=value, got '{pair}'")
        name, _, value = pair.partition("=")
        out[name] = int(value, 0)
    return out


# -- subcommand implementations -------------------------------------------------

def cmd_ifg_build(args) -> int:
    design = _load_design_checked(args.design)
    ifg = build_ifg(design)
    save_ifg(ifg, args.out)
    if args.design_json:
        Path(args.design_json).write_text(export_design(design), encoding="utf-8")
    print(f"[ifg] {len(ifg.vertices)} vertices, {len(ifg.edges)} edges -> {args.out}")
    return EXIT_OK


def cmd_pdlc_extract(args) -> int:
    ifg = load_ifg(_existing(args.ifg))
    manifest = RegisterManifest.load(_existing(args.arch_manifest))
    cls = classify_registers(ifg, manifest)
    for w in cls.warnings:
        print(f"[pdlc] warning: {w}", file=sys.stderr)
    limits = PathLimits(max_len=args.max_len, max_paths=args.max_paths)
    result = extract_pdlc(ifg, cls.arch, cls.microarch, limits)
    save_pdlc(result, args.out)
    trunc = " (truncated)" if result.truncated else ""
    print(
        f"[pdlc] {len(cls.arch)} architectural / {len(cls.microarch)} "
        f"microarchitectural registers, {len(result.paths)} channels{trunc} -> {args.out}"
    )
    return EXIT_OK


def cmd_sim_run(args) -> int:
    design = _load_design_checked(args.design)
    schedule = compile_design(design)
    program = _existing(args.program).read_bytes()
    indicators = IndicatorManifest.load(_existing(args.indicators)) if args.indicators else None
    retire = RetireManifest.load(_existing(args.retire_manifest)) if args.retire_manifest else None
    cfg = SimConfig(
        max_cycles=args.cycles,
        program=program,
        program_memory=args.imem,
        inputs=_parse_inputs(args.input),
        vuln_flags=_parse_vuln(args.vuln),
        halt_signal=args.halt,
        indicators=indicators,
        retire=retire,
    )
    result = run(schedule, cfg)
    print(
        f"[sim] {result.cycles_run} cycles, halted={result.halted}, "
        f"{len(result.retire_log)} retirements, {len(result.windows)} windows"
    )
    if args.vcd:
        dump_vcd(result.waveform, args.vcd, comment=f"spechound {__version__}")
        print(f"[sim] waveform -> {args.vcd}")
    if args.retire_log:
        result.write_retire_log(args.retire_log)
        print(f"[sim] retirement log -> {args.retire_log}")
    if args.windows_out:
        doc = [
            {"id": w.id, "start": w.start_cycle, "end": w.end_cycle,
             "instruction": f"{w.instruction:04X}", "mispredicted": w.mispredicted}
            for w in result.windows
        ]
        Path(args.windows_out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_analyze(args) -> int:
    design = _load_design_checked(args.design)
    wave = load_vcd(_existing(args.vcd))
    retire_log = parse_retire_log(_existing(args.retire_log).read_text(encoding="utf-8"))
    indicators = IndicatorManifest.load(_existing(args.indicators))
    manifest = RegisterManifest.load(_existing(args.arch_manifest))
    pdlc = load_pdlc(_existing(args.pdlc))
    ifg = build_ifg(design)
    cls = classify_registers(ifg, manifest)
    mem_layouts = {
        n: (s.width, s.depth) for n, s in design.signals.items() if s.kind == "mem"
    }
    mst = build_mst(wave, indicators)
    if args.mst_out:
        Path(args.mst_out).write_text(mst_to_json(mst), encoding="utf-8")
    print(mst_to_table(mst.windows, disassemble=isa.disassemble), end="")
    reports = []
    settle = indicators.settle_cycles
    for win in mst.mispredicted():
        if win.end_cycle + settle > wave.max_cycle:
            print(f"[analyze] window {win.id} too close to trace end, skipped",
                  file=sys.stderr)
            continue
        diff = window_diff(wave, win, settle, cls.arch, cls.microarch)
        rep = detect_leaks(diff, win, retire_log, pdlc.paths, mem_layouts, settle)
        if rep is not None:
            reports.append(rep)
    Path(args.out).write_text(
        reports_to_json(args.input_id, reports), encoding="utf-8"
    )
    print(f"[analyze] {len(mst.windows)} windows "
          f"({len(mst.mispredicted())} mispredicted), {len(reports)} leak reports -> {args.out}")
    return EXIT_LEAKS if reports else EXIT_OK


def cmd_fuzz(args) -> int:
    design = _load_design_checked(args.design)
    pdlc = load_pdlc(_existing(args.pdlc))
    manifest = RegisterManifest.load(_existing(args.arch_manifest))
    indicators = IndicatorManifest.load(_existing(args.indicators))
    retire = RetireManifest.load(_existing(args.retire_manifest))
    ifg = build_ifg(design)
    cls = classify_registers(ifg, manifest)
    options = CampaignOptions(
        rng_seed=args.rng_seed,
        budget=args.budget,
        wall_secs=args.wall,
        coverage_mode=args.coverage,
        workers=args.workers,
        vuln_flags=_parse_vuln(args.vuln),
        stop_on_leak=args.stop_on_leak,
        max_cycles=args.cycles,
        out_dir=Path(args.out),
    )
    result = run_campaign(
        design, cls, pdlc, indicators, retire, options,
        halt_signal=args.halt, program_memory=args.imem,
    )
    print(
        f"[fuzz] {result.simulations} simulations ({result.iterations} mutations), "
        f"corpus {len(result.corpus)}, activated "
        f"{len(result.accumulated_lp.activated_paths)}/{len(pdlc.paths)} channels, "
        f"{len(result.leaks)} leak reports in {result.wall_time:.1f}s -> {args.out}"
    )
    return EXIT_LEAKS if result.leaks else EXIT_OK


def cmd_report(args) -> int:
    out_dir = _existing(args.campaign)
    campaign_file = out_dir / "campaign.json"
    if not campaign_file.exists():
        raise CliError(f"no campaign.json under {out_dir}")
    doc = json.loads(campaign_file.read_text(encoding="utf-8"))
    stats = doc["stats"]
    print(f"campaign under {out_dir}")
    print(f"  coverage mode:      {doc['config']['coverage_mode']}")
    print(f"  rng seed:           {doc['config']['rng_seed']}")
    print(f"  simulations:        {stats['simulations']}")
    print(f"  corpus entries:     {stats['corpus_size']}")
    print(f"  activated channels: {stats['activated_channels']}")
    print(f"  leak reports:       {stats['leaks_found']}")
    reports_dir = out_dir / "reports"
    any_leak = False
    for path in sorted(reports_dir.glob("*.json")) if reports_dir.exists() else []:
        rep = json.loads(path.read_text(encoding="utf-8"))
        for w in rep["windows"]:
            any_leak = True
            regs = ", ".join(l["name"] for l in w["leaked_regs"])
            tag = " (unexplained)" if w["unexplained"] else ""
            print(
                f"  leak: input {rep['input_id']} window {w['window']['id']} "
                f"[{w['window']['start']},{w['window']['end']}] "
                f"instr {w['window']['instruction']} -> {regs}; "
                f"{len(w['root_causes'])} channel(s){tag}; {rep['cwe']}"
            )
    csv = out_dir / "coverage.csv"
    if csv.exists() and args.curve:
        print("coverage curve (iteration, covered channels):")
        lines = csv.read_text(encoding="utf-8").splitlines()[1:]
        step = max(1, len(lines) // 20)
        for line in lines[::step]:
            it, count = line.split(",")
            print(f"  {it:>6} {count}")
    return EXIT_LEAKS if any_leak else EXIT_OK


# -- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spechound",
        description="Detect speculative-execution direct leaks in RTL designs: "
        "static flow analysis plus coverage-guided fuzzing.",
    )
    p.add_argument("--version", action="version", version=f"spechound {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    ifg = sub.add_parser("ifg", help="information-flow graph commands")
    ifg_sub = ifg.add_subparsers(dest="subcommand", required=True)
    b = ifg_sub.add_parser("build", help="build the flow graph of a design")
    b.add_argument("--design", required=True, help="input .ntl design file")
    b.add_argument("--out", required=True, help="output graph JSON path")
    b.add_argument("--design-json", help="also export the elaborated design as JSON")
    b.set_defaults(func=cmd_ifg_build)

    pd = sub.add_parser("pdlc", help="leakage-channel commands")
    pd_sub = pd.add_subparsers(dest="subcommand", required=True)
    e = pd_sub.add_parser("extract", help="enumerate potential direct leakage channels")
    e.add_argument("--ifg", required=True, help="flow graph JSON from 'ifg build'")
    e.add_argument("--arch-manifest", required=True,
                   help="JSON with glob patterns naming architectural registers")
    e.add_argument("--out", required=True, help="output channel list JSON path")
    e.add_argument("--max-len", type=int, default=32,
                   help="maximum chain length in signals (default 32)")
    e.add_argument("--max-paths", type=int, default=1_000_000,
                   help="global cap on enumerated channels (default 1e6)")
    e.set_defaults(func=cmd_pdlc_extract)

    sim = sub.add_parser("sim", help="simulation commands")
    sim_sub = sim.add_subparsers(dest="subcommand", required=True)
    r = sim_sub.add_parser("run", help="simulate a program on a design")
    r.add_argument("--design", required=True, help="input .ntl design file")
    r.add_argument("--program", required=True, help="instruction-memory image file")
    r.add_argument("--cycles", type=int, required=True, help="maximum cycles to run")
    r.add_argument("--vuln", help="comma-separated planted-bug flags "
                   "(zenbleed_like, mwait_like)")
    r.add_argument("--vcd", help="write the waveform as VCD")
    r.add_argument("--retire-log", help="write the retirement log (JSON lines)")
    r.add_argument("--windows-out", help="write ground-truth speculation windows JSON")
    r.add_argument("--input", action="append", metavar="NAME=VALUE",
                   help="drive a top-level input port (repeatable)")
    r.add_argument("--imem", default="cpu.imem", help="program memory signal name")
    r.add_argument("--halt", default="cpu.halt", help="halt signal name")
    r.add_argument("--indicators", help="speculation indicator manifest JSON")
    r.add_argument("--retire-manifest", help="retirement interface manifest JSON")
    r.set_defaults(func=cmd_sim_run)

    a = sub.add_parser("analyze", help="analyze a recorded trace for leaks")
    a.add_argument("--design", required=True, help="input .ntl design file")
    a.add_argument("--vcd", required=True, help="waveform from 'sim run'")
    a.add_argument("--retire-log", required=True, help="retirement log from 'sim run'")
    a.add_argument("--arch-manifest", required=True, help="architectural register manifest")
    a.add_argument("--indicators", required=True, help="speculation indicator manifest")
    a.add_argument("--pdlc", required=True, help="channel list from 'pdlc extract'")
    a.add_argument("--out", required=True, help="leak report JSON path")
    a.add_argument("--mst-out", help="also write the misspeculation table JSON")
    a.add_argument("--input-id", default="trace", help="input identifier for the report")
    a.set_defaults(func=cmd_analyze)

    f = sub.add_parser("fuzz", help="run a coverage-guided fuzzing campaign")
    f.add_argument("--design", required=True, help="input .ntl design file")
    f.add_argument("--pdlc", required=True, help="channel list from 'pdlc extract'")
    f.add_argument("--arch-manifest", required=True, help="architectural register manifest")
    f.add_argument("--indicators", required=True, help="speculation indicator manifest")
    f.add_argument("--retire-manifest", required=True, help="retirement interface manifest")
    f.add_argument("--coverage", choices=(KIND_LP, KIND_TOGGLE), default=KIND_LP,
                   help="feedback metric (default lp)")
    budget = f.add_mutually_exclusive_group(required=True)
    budget.add_argument("--budget", type=int, help="mutation iteration budget")
    budget.add_argument("--wall", type=float, help="wall-clock budget in seconds")
    f.add_argument("--workers", type=int, default=1, help="parallel workers (default 1)")
    f.add_argument("--rng-seed", type=int, required=True, help="campaign random seed")
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--vuln", help="comma-separated planted-bug flags")
    f.add_argument("--stop-on-leak", action="store_true",
                   help="stop at the first leaking input")
    f.add_argument("--cycles", type=int, default=200,
                   help="max cycles per simulation (default 200)")
    f.add_argument("--imem", default="cpu.imem", help="program memory signal name")
    f.add_argument("--halt", default="cpu.halt", help="halt signal name")
    f.set_defaults(func=cmd_fuzz)

    rep = sub.add_parser("report", help="render campaign results")
    rep.add_argument("--campaign", required=True, help="campaign output directory")
    rep.add_argument("--curve", action="store_true", help="print the coverage curve")
    rep.set_defaults(func=cmd_report)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; remap to the documented code 1
        if e.code not in (0, None):
            return EXIT_USAGE
        return EXIT_OK
    try:
        return args.func(args)
    except (CliError, NetlistError, VcdError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
