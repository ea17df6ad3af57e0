"""Bundled benchmark programs."""

from __future__ import annotations

from importlib import resources

from .syntax import Program, parse_program

CORPUS_NAMES = ("mj09", "eta", "kcfa2", "kcfa3", "blur", "loop2", "sat")


def benchmark_source(name: str) -> str:
    pkg = resources.files("pdcfa") / "benchmarks" / f"{name}.scm"
    return pkg.read_text(encoding="utf-8")


def load_benchmark(name: str) -> Program:
    return parse_program(benchmark_source(name))


def corpus_programs() -> dict[str, Program]:
    """The seven-program evaluation corpus (toy excluded)."""
    return {name: load_benchmark(name) for name in CORPUS_NAMES}


def toy_program() -> Program:
    return load_benchmark("toy")
