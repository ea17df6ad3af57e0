"""Pushdown control-flow analysis with abstract garbage collection."""

from .syntax import parse, a_normalize, parse_program, validate_anf, free_variables
from .abstract import Mono, OneCfa, PolySplit, KCfa
from .dsg import Bounds, naive_solve, summarize, stacks_nfa, frame_set_of
from .pushdown import to_rpds, to_ipds, rpds_as_ipds, net, stackify
from .analysis import (
    AnalysisConfig, AnalysisReport, compare_grid, finite_baseline,
    run_analysis, soundness_harness,
)
from .corpus import corpus_programs, load_benchmark, toy_program

__version__ = "0.1.0"
