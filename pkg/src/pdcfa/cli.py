"""Command-line front end.

Subcommands:

  analyze FILE   one configuration, optional DOT/JSON dumps
  grid FILE      the eight-configuration comparison table
  corpus         run the bundled benchmarks and their relational checks
  soundness FILE trace-containment check for one configuration

Exit codes: 0 success, 1 usage error, 2 analysis bound exceeded,
3 soundness counterexample.  Errors print to stderr as ``error: ...``.
The PDCFA_NODE_CAP environment variable overrides the default node cap.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import analysis, corpus
from .abstract import KCfa, Mono, OneCfa, PolySplit
from .analysis import AnalysisConfig, AnalysisReport, GRID_KEYS, grid_config
from .dsg import Bounds, Dsg
from .pushdown import EpsAction, PushAction
from .syntax import SourceError, parse_program

DEFAULT_NODE_CAP = 50_000


def _policy_for(name: str | None, k: int):
    if name:
        table = {"mono": Mono(), "1cfa": OneCfa(), "poly": PolySplit()}
        if name in table:
            return table[name]
        if name.endswith("cfa") and name[:-3].isdigit():
            return KCfa(int(name[:-3]))
        raise ValueError(f"unknown policy {name!r}")
    if k == 0:
        return Mono()
    if k == 1:
        return OneCfa()
    return KCfa(k)


def _bounds(args) -> Bounds:
    cap = args.node_cap
    if cap is None:
        cap = int(os.environ.get("PDCFA_NODE_CAP", DEFAULT_NODE_CAP))
    return Bounds(max_nodes=cap, wall_clock=args.time_limit)


def _load(path: str):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


# ---------------------------------------------------------------------------
# Emitters
# ---------------------------------------------------------------------------

def _node_order(g: Dsg):
    return sorted(g.nodes, key=lambda q: q.skey)


def emit_dot(g: Dsg, path: str) -> None:
    """Deterministic GraphViz rendering of a solved graph."""
    names = {q: f"n{i}" for i, q in enumerate(_node_order(g))}

    def edge_label(act):
        if isinstance(act, EpsAction):
            return "eps"
        frame = act.frame
        kind = "push" if isinstance(act, PushAction) else "pop"
        return f"{kind}:{frame.binder}@{frame.body.label}"

    lines = ["digraph dsg {"]
    for q, name in names.items():
        shape = ", shape=doublecircle" if q is g.root else ""
        lines.append(f'  {name} [label="{q.exp.label}|{len(q.store)}"{shape}];')
    for (u, act, v) in sorted(g.edges, key=lambda e: (names[e[0]], e[1].skey, names[e[2]])):
        lines.append(f'  {names[u]} -> {names[v]} [label="{edge_label(act)}"];')
    lines.append("}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def report_payload(program_name: str, config_name: str,
                   report: AnalysisReport) -> dict:
    return {
        "program": program_name,
        "config": config_name,
        "states": report.states,
        "edges": report.edges,
        "singletons": report.singletons,
        "flowSets": [{"var": v, "lams": sorted(s)}
                     for v, s in sorted(report.flow_sets.items())],
        "elapsedMs": round(report.elapsed * 1000.0, 3),
        "outcome": report.outcome,
    }


def emit_json(payload, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_name(cfg: AnalysisConfig) -> str:
    k = cfg.policy.describe()
    stack = "pdcfa" if cfg.pushdown else "cfa"
    return f"{k}-{stack}{'-gc' if cfg.gc else ''}"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_analyze(args) -> int:
    program = _load(args.file)
    policy = _policy_for(args.policy, args.k)
    cfg = AnalysisConfig(policy, pushdown=args.pushdown, gc=args.gc,
                         bounds=_bounds(args))
    full = analysis.run_analysis_full(program, cfg)
    report = full.report
    name = os.path.basename(args.file)
    print(f"{name}: states={report.states} edges={report.edges} "
          f"singletons={report.singletons} outcome={report.outcome}")
    if args.dot:
        if not cfg.pushdown:
            raise ValueError("DOT output requires a pushdown analysis")
        emit_dot(full.dsg, args.dot)
    if args.json:
        emit_json(report_payload(name, _config_name(cfg), report), args.json)
    return 2 if report.outcome == "boundExceeded" else 0


def _grid_rows(program, bounds):
    rows = []
    for key in GRID_KEYS:
        rows.append((key, analysis.run_analysis(program, grid_config(key, bounds))))
    return rows


def _print_grid(name: str, rows) -> None:
    print(f"== {name}")
    print(f"{'config':14} {'states':>7} {'edges':>7} {'singletons':>10}  outcome")
    for key, r in rows:
        print(f"{key:14} {r.states:>7} {r.edges:>7} {r.singletons:>10}  {r.outcome}")


def _cmd_grid(args) -> int:
    program = _load(args.file)
    rows = _grid_rows(program, _bounds(args))
    _print_grid(os.path.basename(args.file), rows)
    if args.json:
        name = os.path.basename(args.file)
        payload = {key: report_payload(name, key, r) for key, r in rows}
        emit_json(payload, args.json)
    return 2 if any(r.outcome == "boundExceeded" for _, r in rows) else 0


def _cmd_corpus(args) -> int:
    bounds = _bounds(args)
    failures = []
    for name in corpus.CORPUS_NAMES:
        program = corpus.load_benchmark(name)
        rows = dict(_grid_rows(program, bounds))
        _print_grid(name, list(rows.items()))
        for k in ("k0", "k1"):
            for stack in ("cfa", "pdcfa"):
                gc_r, plain = rows[f"{k}-{stack}-gc"], rows[f"{k}-{stack}"]
                if gc_r.singletons < plain.singletons:
                    failures.append(f"{name}: {k}-{stack} gc singletons dropped")
        fused, pd = rows["k0-pdcfa-gc"], rows["k0-pdcfa"]
        for v, s in fused.flow_sets.items():
            if not s <= pd.flow_of(v):
                failures.append(f"{name}: fused flow of {v} not within pushdown-only")
    for f in failures:
        print(f"error: {f}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_soundness(args) -> int:
    program = _load(args.file)
    policy = _policy_for(args.policy, args.k)
    cfg = AnalysisConfig(policy, pushdown=args.pushdown, gc=args.gc,
                         bounds=_bounds(args))
    res = analysis.soundness_harness(program, cfg, fuel=args.fuel)
    if res.ok:
        print(f"ok: {res.steps} concrete steps covered")
        return 0
    if res.counterexample is not None:
        print(f"counterexample at step {res.counterexample}: {res.reason}")
        return 3
    print(f"inconclusive at step {res.inconclusive}: {res.reason}")
    return 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdcfa",
                                 description="pushdown control-flow analysis "
                                             "with abstract garbage collection")
    sub = ap.add_subparsers(dest="mode", required=True)

    def common(p, with_file=True):
        if with_file:
            p.add_argument("file", help="program (.scm)")
        p.add_argument("--k", type=int, default=0)
        p.add_argument("--policy", default=None,
                       help="mono | 1cfa | poly | <k>cfa (default: from --k)")
        p.add_argument("--pushdown", action="store_true")
        p.add_argument("--gc", action="store_true")
        p.add_argument("--node-cap", type=int, default=None)
        p.add_argument("--time-limit", type=float, default=None,
                       help="wall clock per analysis, seconds")

    p = sub.add_parser("analyze", help="run one configuration")
    common(p)
    p.add_argument("--dot", help="write the Dyck state graph as DOT")
    p.add_argument("--json", help="write the analysis report as JSON")
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("grid", help="run all eight configurations")
    common(p)
    p.add_argument("--json", help="write all reports as JSON")
    p.set_defaults(fn=_cmd_grid)

    p = sub.add_parser("corpus", help="run the bundled benchmark corpus")
    common(p, with_file=False)
    p.set_defaults(fn=_cmd_corpus)

    p = sub.add_parser("soundness", help="check the analysis against a concrete run")
    common(p)
    p.add_argument("--fuel", type=int, default=100_000)
    p.set_defaults(fn=_cmd_soundness)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    try:
        return args.fn(args)
    except (FileNotFoundError, SourceError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
