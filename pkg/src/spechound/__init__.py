"""spechound: pre-silicon detection of speculative-execution direct leaks.

Offline phase: parse an RTL design, build its information-flow graph and
enumerate potential direct leakage channels (microarchitectural register ->
architectural register chains).  Online phase: coverage-guided fuzzing over a
cycle-accurate simulator with snapshot-diff leak detection, no golden model.
"""

__version__ = "0.1.0"
