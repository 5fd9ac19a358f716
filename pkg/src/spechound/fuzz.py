"""Coverage-guided mutation fuzzer over the cycle simulator.

Inputs are instruction-memory images.  Each iteration mutates a corpus entry,
simulates it, analyzes the trace (misspeculation table, window diffs, leak
detection, coverage), and admits the input when it increases accumulated
coverage or leaks.  Single-worker campaigns are bit-reproducible from the
rng seed.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from . import isa
from .coverage import CoverageMap, KIND_LP, KIND_TOGGLE, is_interesting, lp_coverage, toggle_coverage
from .detect import LeakReport, detect_leaks, reports_to_json
from .pdlc import Classification, PdlcResult
from .sim import RetireManifest, Schedule, SimConfig, compile_design, run
from .trace import IndicatorManifest, build_mst, window_diff

MIN_LEN = 8  # bytes
MAX_LEN = isa.IMEM_DEPTH * 2

MUTATION_WEIGHTS = {
    "bit-flip": 0.35,
    "byte-flip": 0.20,
    "word-swap": 0.15,
    "word-delete": 0.15,
    "word-clone": 0.15,
}


def input_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


@dataclass(frozen=True)
class TestInput:
    data: bytes
    id: str
    parent: Optional[str] = None  # parent id
    op: Optional[str] = None  # mutation operator, None for seeds

    @classmethod
    def make(cls, data: bytes, parent=None, op=None) -> "TestInput":
        if len(data) % 2:
            raise ValueError("test inputs must have even length")
        if not MIN_LEN <= len(data) <= MAX_LEN:
            raise ValueError(f"test input length {len(data)} outside [{MIN_LEN}, {MAX_LEN}]")
        return cls(bytes(data), input_id(data), parent, op)


def mutate(inp: TestInput, rng: random.Random) -> TestInput:
    """Apply one mutation operator; inapplicable draws (delete at minimum
    length, clone at maximum) are resampled so the result is always valid."""
    ops = list(MUTATION_WEIGHTS)
    weights = [MUTATION_WEIGHTS[o] for o in ops]
    data = bytearray(inp.data)
    while True:
        op = rng.choices(ops, weights=weights)[0]
        if op == "word-delete" and len(data) <= MIN_LEN:
            continue
        if op == "word-clone" and len(data) >= MAX_LEN:
            continue
        if op == "word-swap" and len(data) < 4:
            continue
        break
    if op == "bit-flip":
        pos = rng.randrange(len(data) * 8)
        data[pos // 8] ^= 1 << (pos % 8)
    elif op == "byte-flip":
        pos = rng.randrange(len(data))
        data[pos] ^= 0xFF
    elif op == "word-swap":
        nwords = len(data) // 2
        i = rng.randrange(nwords)
        j = rng.randrange(nwords - 1)
        if j >= i:
            j += 1
        wi = data[2 * i:2 * i + 2]
        wj = data[2 * j:2 * j + 2]
        data[2 * i:2 * i + 2] = wj
        data[2 * j:2 * j + 2] = wi
    elif op == "word-delete":
        i = rng.randrange(len(data) // 2)
        del data[2 * i:2 * i + 2]
    elif op == "word-clone":
        i = rng.randrange(len(data) // 2)
        word = data[2 * i:2 * i + 2]
        data[2 * i:2 * i] = word
    return TestInput.make(bytes(data), parent=inp.id, op=op)


# -- seeds ---------------------------------------------------------------------

def _pad_to_min(words: List[int]) -> List[int]:
    while len(words) * 2 < MIN_LEN:
        words.append(isa.nop())
    return words


def _csr_warmup(rng: random.Random) -> Tuple[List[int], int]:
    """Write a random value to each CSR; returns (words, monitor address).

    CSR reads land in r4: there is no hardwired zero register, so discarding
    them into r0 would corrupt the templates' zero base register.
    """
    words: List[int] = []
    monitor = rng.randrange(isa.DMEM_DEPTH)
    values = {
        isa.CSR_ZEN_EN: rng.randrange(64),
        isa.CSR_MWAIT_EN: rng.randrange(64),
        isa.CSR_MONITOR_ADDR: monitor,
        isa.CSR_MWAIT_TIMER: rng.randrange(64),
    }
    for csr in range(4):
        reg = 1 + (csr % 3)
        words.append(isa.addi(reg, 0, values[csr] & 0x1F))
        words.append(isa.csrrw(4, reg, csr))
    return words, monitor


def _loop_block(rng: random.Random, monitor: int) -> List[int]:
    """Trained-then-violated counted loop whose body and fall-through both
    carry register writes and loads, so wrong paths have visible effects."""
    count = rng.randrange(2, 6)
    lw_first = rng.random() < 0.5
    body = [
        isa.lw(6, 0, monitor) if lw_first else isa.addi(3, 3, 1),
        isa.addi(3, 3, 1) if lw_first else isa.lw(6, 0, monitor),
    ]
    words = [isa.addi(2, 0, count)]
    words += body
    words.append(isa.addi(2, 2, -1))
    words.append(isa.blt(0, 2, -(len(body) + 1)))
    # fall-through: the wrong path while the loop branch trains not-taken
    words.append(isa.addi(5, 0, rng.randrange(32)))
    words.append(isa.lw(7, 0, monitor))
    words.append(isa.sw(3, 0, rng.randrange(isa.DMEM_DEPTH) & 0x1F))
    return words


def _seed_branch_loop(rng: random.Random) -> bytes:
    words, monitor = _csr_warmup(rng)
    words += _loop_block(rng, monitor)
    words.append(isa.halt())
    return isa.assemble(_pad_to_min(words))


def _seed_jal_flip(rng: random.Random) -> bytes:
    """Jump over a decoy block whose size varies per seed; the landing block
    opens mispredicted windows (branch-target-injection style layout)."""
    words, monitor = _csr_warmup(rng)
    decoy_len = rng.choice((2, 4))
    words.append(isa.jal(7, decoy_len + 1))
    for _ in range(decoy_len):
        words.append(isa.addi(4, 4, 1) if rng.random() < 0.5 else isa.lw(6, 0, monitor))
    words += _loop_block(rng, monitor)
    words.append(isa.halt())
    return isa.assemble(_pad_to_min(words))


def _seed_call_chain(rng: random.Random) -> bytes:
    """Nested link-register calls with a depth-mismatched static return
    (return-stack style layout; the fixture has no return predictor, so the
    speculation comes from the embedded loop)."""
    words, monitor = _csr_warmup(rng)
    words.append(isa.jal(6, 4))  # call f1
    return_site = len(words)  # inner return lands here: one frame short
    words.append(isa.addi(5, 5, 1))
    words.append(isa.sw(5, 0, monitor))
    words.append(isa.halt())
    # f1: call f2, then fall into payload
    words.append(isa.jal(7, 2))
    words.append(isa.addi(4, 4, 2))
    # f2: loop, then return to the *outer* call site
    words += _loop_block(rng, monitor)
    words.append(isa.jal(0, return_site - len(words)))
    return isa.assemble(_pad_to_min(words))


_SPECIAL_TEMPLATES = (_seed_branch_loop, _seed_jal_flip, _seed_call_chain)


def make_seeds(kind: str, n: int, rng: random.Random,
               length: Optional[int] = None) -> List[TestInput]:
    """`random`: uniform byte images; `special`: templated programs that open
    mispredicted windows (trained loops, jump-over layouts, call chains).
    A requested `length` is clamped into [MIN_LEN, MAX_LEN] and made even."""
    if n < 1:
        raise ValueError("need at least one seed")
    out: List[TestInput] = []
    if kind == "random":
        for _ in range(n):
            want = length if length is not None else rng.randrange(MIN_LEN, 97)
            want = min(max(want - want % 2, MIN_LEN), MAX_LEN)
            out.append(TestInput.make(bytes(rng.randrange(256) for _ in range(want))))
    elif kind == "special":
        for i in range(n):
            template = _SPECIAL_TEMPLATES[i % len(_SPECIAL_TEMPLATES)]
            out.append(TestInput.make(template(rng)))
    else:
        raise ValueError(f"unknown seed kind '{kind}'")
    return out


# -- campaign ------------------------------------------------------------------

@dataclass
class CampaignOptions:
    rng_seed: int
    budget: Optional[int] = 1000  # mutation iterations; None with wall_secs
    wall_secs: Optional[float] = None
    coverage_mode: str = KIND_LP  # "lp" or "toggle"
    workers: int = 1
    vuln_flags: FrozenSet[str] = frozenset()
    stop_on_leak: bool = False
    max_cycles: int = 200
    seeds_random: int = 4
    seeds_special: int = 6
    out_dir: Optional[Path] = None

    def __post_init__(self):
        if self.coverage_mode not in (KIND_LP, KIND_TOGGLE):
            raise ValueError(f"unknown coverage mode '{self.coverage_mode}'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.budget is None and self.wall_secs is None:
            raise ValueError("need an iteration budget or a wall-clock budget")


@dataclass
class Evaluation:
    input: TestInput
    coverage: CoverageMap  # feedback-mode map
    lp: CoverageMap  # always computed: measurement of activated channels
    leaks: List[LeakReport]
    windows: int
    mispredicted: int
    skipped_windows: int  # end+settle beyond trace end
    halted: bool
    retired: int


@dataclass
class CorpusEntry:
    input: TestInput
    sim_index: int
    leaked: bool
    last_gain: int  # sim index of the most recent coverage gain it produced


@dataclass
class CampaignResult:
    corpus: List[CorpusEntry]
    accumulated: CoverageMap  # feedback-mode accumulation
    accumulated_lp: CoverageMap
    leaks: List[Tuple[str, LeakReport]]  # (input id, report)
    series: List[Tuple[int, int]]  # (simulation index, activated channels)
    iterations: int  # mutation iterations executed
    simulations: int
    stopped_on_leak: bool
    wall_time: float
    options: CampaignOptions

    def leak_inputs(self) -> Set[str]:
        return {iid for iid, _ in self.leaks}


class _Analyzer:
    """Per-process analysis context: compiled schedule plus manifests."""

    def __init__(self, design, classification: Classification,
                 pdlc: PdlcResult, indicators: IndicatorManifest,
                 retire: RetireManifest, options: CampaignOptions,
                 halt_signal: str, program_memory: str):
        self.schedule = compile_design(design)
        self.classification = classification
        self.pdlc = pdlc
        self.indicators = indicators
        self.retire = retire
        self.options = options
        self.halt_signal = halt_signal
        self.program_memory = program_memory
        self.mem_layouts = {
            n: (s.width, s.depth)
            for n, s in design.signals.items()
            if s.kind == "mem"
        }

    def evaluate(self, inp: TestInput) -> Evaluation:
        cfg = SimConfig(
            max_cycles=self.options.max_cycles,
            program=inp.data,
            program_memory=self.program_memory,
            halt_signal=self.halt_signal,
            indicators=self.indicators,
            retire=self.retire,
            vuln_flags=self.options.vuln_flags,
        )
        res = run(self.schedule, cfg)
        mst = build_mst(res.waveform, self.indicators)
        settle = self.indicators.settle_cycles
        leaks: List[LeakReport] = []
        skipped = 0
        for win in mst.mispredicted():
            if win.end_cycle + settle > res.waveform.max_cycle:
                skipped += 1
                continue
            diff = window_diff(
                res.waveform, win, settle,
                self.classification.arch, self.classification.microarch,
            )
            rep = detect_leaks(
                diff, win, res.retire_log, self.pdlc.paths, self.mem_layouts, settle
            )
            if rep is not None:
                leaks.append(rep)
        lp = lp_coverage(res.waveform, mst.windows, self.pdlc.paths)
        if self.options.coverage_mode == KIND_LP:
            cov = lp
        else:
            cov = toggle_coverage(res.waveform)
        return Evaluation(
            input=inp,
            coverage=cov,
            lp=lp,
            leaks=leaks,
            windows=len(mst.windows),
            mispredicted=len(mst.mispredicted()),
            skipped_windows=skipped,
            halted=res.halted,
            retired=len(res.retire_log),
        )


_WORKER: Optional[_Analyzer] = None


def _worker_init(design, classification, pdlc, indicators, retire, options,
                 halt_signal, program_memory):
    global _WORKER
    _WORKER = _Analyzer(design, classification, pdlc, indicators, retire,
                        options, halt_signal, program_memory)


def _worker_eval(inp: TestInput) -> Evaluation:
    return _WORKER.evaluate(inp)


class _Scheduler:
    """Round-robin over the corpus; entries with a coverage gain in the last
    100 simulations appear twice per lap."""

    RECENT = 100

    def __init__(self):
        self._lap: List[int] = []
        self._pos = 0

    def next_index(self, corpus: List[CorpusEntry], now: int) -> int:
        if self._pos >= len(self._lap):
            self._lap = []
            for i, e in enumerate(corpus):
                self._lap.append(i)
                if now - e.last_gain <= self.RECENT:
                    self._lap.append(i)
            self._pos = 0
        idx = self._lap[self._pos]
        self._pos += 1
        return idx


def run_campaign(
    design,
    classification: Classification,
    pdlc: PdlcResult,
    indicators: IndicatorManifest,
    retire: RetireManifest,
    options: CampaignOptions,
    halt_signal: str = "cpu.halt",
    program_memory: str = "cpu.imem",
) -> CampaignResult:
    """Run one fuzzing campaign; writes corpus/reports/series into
    options.out_dir when set and returns the in-memory result."""
    start = time.monotonic()
    rng = random.Random(options.rng_seed)

    seeds = make_seeds("special", options.seeds_special, rng) if options.seeds_special else []
    seeds += make_seeds("random", options.seeds_random, rng) if options.seeds_random else []
    if not seeds:
        raise ValueError("campaign needs at least one seed")

    analyzer = _Analyzer(design, classification, pdlc, indicators, retire,
                         options, halt_signal, program_memory)
    pool = None
    if options.workers > 1:
        ctx = multiprocessing.get_context("fork")
        pool = ctx.Pool(
            options.workers,
            initializer=_worker_init,
            initargs=(design, classification, pdlc, indicators, retire,
                      options, halt_signal, program_memory),
        )

    corpus: List[CorpusEntry] = []
    seen_ids: Set[str] = set()
    accumulated = CoverageMap(options.coverage_mode)
    accumulated_lp = CoverageMap(KIND_LP)
    leaks: List[Tuple[str, LeakReport]] = []
    reports_by_input: Dict[str, List[LeakReport]] = {}
    series: List[Tuple[int, int]] = []
    sim_index = 0
    iterations = 0
    stopped_on_leak = False

    def over_wall() -> bool:
        return options.wall_secs is not None and \
            time.monotonic() - start >= options.wall_secs

    def fold(ev: Evaluation, is_seed: bool) -> None:
        nonlocal accumulated, accumulated_lp, sim_index
        sim_index += 1
        gained = is_interesting(ev.coverage, accumulated)
        accumulated = accumulated.merge(ev.coverage)
        accumulated_lp = accumulated_lp.merge(ev.lp)
        series.append((sim_index, len(accumulated_lp.activated_paths)))
        leaked = bool(ev.leaks)
        if leaked:
            for rep in ev.leaks:
                leaks.append((ev.input.id, rep))
            reports_by_input.setdefault(ev.input.id, []).extend(ev.leaks)
        if (is_seed or gained or leaked) and ev.input.id not in seen_ids:
            seen_ids.add(ev.input.id)
            corpus.append(
                CorpusEntry(ev.input, sim_index, leaked,
                            last_gain=sim_index if (gained or is_seed) else 0)
            )
        if gained and ev.input.parent is not None:
            for e in corpus:
                if e.input.id == ev.input.parent:
                    e.last_gain = sim_index
                    break

    def evaluate_batch(inputs: Sequence[TestInput]) -> List[Evaluation]:
        if pool is not None:
            return pool.map(_worker_eval, inputs)
        return [analyzer.evaluate(i) for i in inputs]

    for ev in evaluate_batch(seeds):
        fold(ev, is_seed=True)
    if options.stop_on_leak and leaks:
        stopped_on_leak = True

    scheduler = _Scheduler()
    batch = max(1, options.workers)
    while not stopped_on_leak and not over_wall():
        if options.budget is not None and iterations >= options.budget:
            break
        todo = batch
        if options.budget is not None:
            todo = min(todo, options.budget - iterations)
        children = []
        for _ in range(todo):
            parent = corpus[scheduler.next_index(corpus, sim_index)]
            children.append(mutate(parent.input, rng))
        for ev in evaluate_batch(children):
            iterations += 1
            fold(ev, is_seed=False)
            if options.stop_on_leak and ev.leaks:
                stopped_on_leak = True
                break

    if pool is not None:
        pool.close()
        pool.join()

    result = CampaignResult(
        corpus=corpus,
        accumulated=accumulated,
        accumulated_lp=accumulated_lp,
        leaks=leaks,
        series=series,
        iterations=iterations,
        simulations=sim_index,
        stopped_on_leak=stopped_on_leak,
        wall_time=time.monotonic() - start,
        options=options,
    )
    if options.out_dir is not None:
        write_campaign(result, reports_by_input, Path(options.out_dir))
    return result


def write_campaign(result: CampaignResult,
                   reports_by_input: Dict[str, List[LeakReport]],
                   out_dir: Path) -> None:
    """Output layout: corpus/, reports/, coverage.csv, campaign.json.
    Everything except the campaign.json timing block is a deterministic
    function of (design, config, rng_seed) for single-worker runs."""
    corpus_dir = out_dir / "corpus"
    reports_dir = out_dir / "reports"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    reports_dir.mkdir(parents=True, exist_ok=True)

    for pos, entry in enumerate(result.corpus):
        (corpus_dir / f"{pos:05d}_{entry.input.id}.bin").write_bytes(entry.input.data)

    for iid in sorted(reports_by_input):
        (reports_dir / f"{iid}.json").write_text(
            reports_to_json(iid, reports_by_input[iid]), encoding="utf-8"
        )

    with open(out_dir / "coverage.csv", "w", encoding="utf-8") as f:
        f.write("iteration,covered_pdlc_count\n")
        for it, count in result.series:
            f.write(f"{it},{count}\n")

    opt = result.options
    doc = {
        "format_version": 1,
        "config": {
            "rng_seed": opt.rng_seed,
            "budget": opt.budget,
            "wall_secs": opt.wall_secs,
            "coverage_mode": opt.coverage_mode,
            "workers": opt.workers,
            "vuln_flags": sorted(opt.vuln_flags),
            "stop_on_leak": opt.stop_on_leak,
            "max_cycles": opt.max_cycles,
            "seeds_random": opt.seeds_random,
            "seeds_special": opt.seeds_special,
        },
        "stats": {
            "iterations": result.iterations,
            "simulations": result.simulations,
            "corpus_size": len(result.corpus),
            "leaks_found": len(result.leaks),
            "leaking_inputs": sorted(result.leak_inputs()),
            "activated_channels": len(result.accumulated_lp.activated_paths),
            "stopped_on_leak": result.stopped_on_leak,
        },
        "corpus": [
            {
                "id": e.input.id,
                "parent": e.input.parent,
                "op": e.input.op,
                "sim_index": e.sim_index,
                "leaked": e.leaked,
            }
            for e in result.corpus
        ],
        "timing": {"wall_time_secs": round(result.wall_time, 3)},
    }
    with open(out_dir / "campaign.json", "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
