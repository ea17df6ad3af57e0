"""Analysis orchestration: the eight-way grid, the finite-state baseline,
precision metrics, and the trace-containment soundness harness.

A configuration selects the allocation policy, whether the stack is
treated precisely (pushdown) or finitized through store-allocated
continuations (baseline), and whether abstract garbage collection runs
before every transition.

Flow sets are collected at bind time: every store write of closure
values is credited to the bound variable.  A variable is a singleton
when exactly one lambda ever flows to it.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass

from . import abstract, concrete
from .abstract import (
    AbsClo, AbsConf, KCfa, Mono, OneCfa, store_bind, store_restrict,
)
from .dsg import Bounds, Dsg, SolveResult, summarize
from .gc import reachable_from
from .pushdown import (
    IpdsOracle, PopAction, PushAction, rpds_as_ipds, to_ipds, to_rpds,
)
from .syntax import Program, validate_anf


@dataclass(frozen=True)
class AnalysisConfig:
    policy: object
    pushdown: bool
    gc: bool
    bounds: Bounds = Bounds()


@dataclass(frozen=True)
class AnalysisReport:
    states: int
    edges: int
    flow_sets: dict            # var name -> frozenset of lambda ids
    singletons: int
    elapsed: float             # seconds
    outcome: str               # "complete" | "boundExceeded"

    def flow_of(self, var: str) -> frozenset:
        return self.flow_sets.get(var, frozenset())


class FlowCollector:
    def __init__(self):
        self.flows: dict[str, set[int]] = {}

    def __call__(self, var: str, vals):
        bucket = self.flows.get(var)
        if bucket is None:
            bucket = self.flows[var] = set()
        for v in vals:
            if isinstance(v, AbsClo):
                bucket.add(v.lam.lam_id)

    def freeze(self) -> dict:
        return {v: frozenset(s) for v, s in sorted(self.flows.items())}


def _report(states, edges, flows: FlowCollector, elapsed, outcome) -> AnalysisReport:
    flow_sets = flows.freeze()
    singles = sum(1 for s in flow_sets.values() if len(s) == 1)
    return AnalysisReport(states, edges, flow_sets, singles, elapsed, outcome)


# ---------------------------------------------------------------------------
# Finite-state baseline: store-allocated continuations
# ---------------------------------------------------------------------------

HALT = -1


class KontStore:
    """Interned map from continuation address (target label) to kont entries."""

    __slots__ = ("items", "map", "skey", "_hash")

    def get(self, ka: int):
        return self.map.get(ka, ())

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other


_kstore_table: dict[tuple, KontStore] = {}


def _kont_store(pairs) -> KontStore:
    items = tuple(sorted(
        ((ka, tuple(sorted(entries, key=lambda e: (e[0].skey, e[1]))))
         for ka, entries in pairs if entries),
        key=lambda p: p[0]))
    skey = tuple((ka, tuple((f.skey, nx) for f, nx in entries))
                 for ka, entries in items)
    ks = _kstore_table.get(skey)
    if ks is None:
        ks = KontStore()
        ks.items = items
        ks.map = dict(items)
        ks.skey = skey
        ks._hash = hash(skey)
        _kstore_table[skey] = ks
    return ks


EMPTY_KONTS = _kont_store(())


def _kont_bind(ks: KontStore, ka: int, entry) -> KontStore:
    cur = ks.map.get(ka, ())
    if entry in cur:
        return ks
    m = dict(ks.map)
    m[ka] = cur + (entry,)
    return _kont_store(m.items())


class BaselineState:
    __slots__ = ("exp", "env", "store", "konts", "kptr", "time", "skey", "sid", "_hash")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __repr__(self):
        return f"b(label={self.exp.label}, |store|={len(self.store)}, kptr={self.kptr})"


_bstate_table: dict[tuple, BaselineState] = {}


def _bstate(exp, env, store, konts, kptr, tm) -> BaselineState:
    skey = (exp.uid, env.skey, store.skey, konts.skey, kptr, tm)
    s = _bstate_table.get(skey)
    if s is None:
        s = BaselineState()
        s.exp = exp
        s.env = env
        s.store = store
        s.konts = konts
        s.kptr = kptr
        s.time = tm
        s.skey = skey
        s.sid = len(_bstate_table)
        s._hash = hash(skey)
        _bstate_table[skey] = s
    return s


def _kont_reach(konts: KontStore, kptr: int):
    """Kont addresses and frame environments reachable from a pointer."""
    seen = {kptr}
    work = [kptr]
    envs = []
    while work:
        ka = work.pop()
        for frame, nxt in konts.get(ka):
            envs.append(frame.env)
            if nxt not in seen:
                seen.add(nxt)
                work.append(nxt)
    return seen, envs


def _collect_baseline(st: BaselineState) -> BaselineState:
    kaddrs, envs = _kont_reach(st.konts, st.kptr)
    roots = set(st.env.range())
    for e in envs:
        roots |= e.range()
    keep = reachable_from(roots, st.store)
    store = store_restrict(st.store, keep)
    konts = st.konts
    if any(ka not in kaddrs for ka, _ in st.konts.items):
        konts = _kont_store((ka, en) for ka, en in st.konts.items if ka in kaddrs)
    if store is st.store and konts is st.konts:
        return st
    return _bstate(st.exp, st.env, store, konts, st.kptr, st.time)


def _baseline_step(st: BaselineState, policy, collect: bool, flow_sink):
    """Successor states with their stack-action kinds."""
    if collect:
        st = _collect_baseline(st)
    k = policy.k if isinstance(policy, KCfa) else 0
    history = (st.exp.label,) + st.time
    parts = abstract.step_parts(st.exp, st.env, st.store, policy,
                                history, flow_sink)
    tm = history[:max(k - 1, 0)]
    out = []
    for (e, r, s) in parts.eps:
        out.append(("eps", _bstate(e, r, s, st.konts, st.kptr, tm)))
    for frame, (e, r, s) in parts.pushes:
        ka = e.label  # continuations keyed by the target expression
        konts2 = _kont_bind(st.konts, ka, (frame, st.kptr))
        out.append(("push", _bstate(e, r, s, konts2, ka, tm)))
    if parts.ret is not None and st.kptr != HALT:
        for frame, nxt in st.konts.get(st.kptr):
            body, env2 = abstract.pop_step(parts.ret, st.exp.label, frame,
                                           policy, history, flow_sink)
            a = env2.lookup(frame.binder)
            store2 = store_bind(st.store, a, parts.ret)
            out.append(("pop", _bstate(body, env2, store2, st.konts, nxt, tm)))
    return st, out


@dataclass(eq=False)
class BaselineResult:
    states: dict                 # explored states (collected form), ordered
    edges: dict                  # (src, kind, dst) ordered set
    root: BaselineState
    outcome: str
    report: AnalysisReport


def finite_baseline(program: Program, policy, collect: bool,
                    bounds: Bounds = Bounds()) -> BaselineResult:
    """Classical machine-style k-CFA with store-allocated continuations.

    The stack is finitized by keying each pushed continuation on the
    label of the expression being entered, so the state space is finite
    and plain graph reachability explores it.  With ``collect`` the
    store is garbage-collected before every transition, with stack roots
    drawn from every continuation reachable from the state's pointer.
    """
    _require_valid(program)
    flows = FlowCollector()
    t0 = time.monotonic()
    root = _bstate(program.root, abstract.EMPTY_ENV, abstract.EMPTY_STORE,
                   EMPTY_KONTS, HALT, ())
    states: dict = {}
    edges: dict = {}
    outcome = "complete"
    queue = deque([root])
    queued = {root}
    ticks = 0
    while queue:
        st = queue.popleft()
        src, succs = _baseline_step(st, policy, collect, flows)
        if src not in states:
            states[src] = None
        for kind, dst in succs:
            edges[(src, kind, dst)] = None
            if dst not in queued:
                queued.add(dst)
                queue.append(dst)
        if len(queued) > bounds.max_nodes:
            outcome = "boundExceeded"
            break
        ticks += 1
        if bounds.wall_clock is not None and ticks % 512 == 0:
            if time.monotonic() - t0 > bounds.wall_clock:
                outcome = "boundExceeded"
                break
    elapsed = time.monotonic() - t0
    report = _report(len(states), len(edges), flows, elapsed, outcome)
    return BaselineResult(states, edges, root, outcome, report)


# ---------------------------------------------------------------------------
# Pushdown analyses
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PushdownResult:
    solve: SolveResult
    oracle: IpdsOracle
    report: AnalysisReport

    @property
    def dsg(self) -> Dsg:
        return self.solve.dsg


def pushdown_analysis(program: Program, policy, collect: bool,
                      bounds: Bounds = Bounds()) -> PushdownResult:
    _require_valid(program)
    flows = FlowCollector()
    if collect:
        oracle = to_ipds(program, policy, flow_sink=flows)
    else:
        oracle = rpds_as_ipds(to_rpds(program, policy, flow_sink=flows))
    t0 = time.monotonic()
    solved = summarize(oracle, bounds)
    elapsed = time.monotonic() - t0
    report = _report(solved.dsg.node_count(), solved.dsg.edge_count(),
                     flows, elapsed, solved.outcome)
    return PushdownResult(solved, oracle, report)


def _require_valid(program: Program):
    bad = validate_anf(program)
    if bad:
        raise ValueError(f"program fails ANF validation: {bad[:3]}")


def run_analysis(program: Program, cfg: AnalysisConfig) -> AnalysisReport:
    """Run one grid cell and report states, edges, and flow metrics."""
    return run_analysis_full(program, cfg).report


def run_analysis_full(program: Program, cfg: AnalysisConfig):
    if cfg.pushdown:
        return pushdown_analysis(program, cfg.policy, cfg.gc, cfg.bounds)
    return finite_baseline(program, cfg.policy, cfg.gc, cfg.bounds)


# ---------------------------------------------------------------------------
# The eight-configuration grid
# ---------------------------------------------------------------------------

GRID_KEYS = (
    "k0-cfa", "k0-cfa-gc", "k0-pdcfa", "k0-pdcfa-gc",
    "k1-cfa", "k1-cfa-gc", "k1-pdcfa", "k1-pdcfa-gc",
)


def grid_config(key: str, bounds: Bounds = Bounds()) -> AnalysisConfig:
    k, rest = key.split("-", 1)
    policy = Mono() if k == "k0" else OneCfa()
    return AnalysisConfig(
        policy=policy,
        pushdown=rest.startswith("pdcfa"),
        gc=rest.endswith("-gc"),
        bounds=bounds,
    )


def compare_grid(program: Program, bounds: Bounds = Bounds()):
    """All eight combinations, in the fixed GRID_KEYS order."""
    return [(key, run_analysis(program, grid_config(key, bounds)))
            for key in GRID_KEYS]


# ---------------------------------------------------------------------------
# Soundness harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HarnessResult:
    ok: bool
    counterexample: int | None = None     # first failing trace index
    inconclusive: int | None = None       # uncovered step under a partial analysis
    reason: str | None = None
    steps: int = 0


def _live_restrict(c: concrete.Conf) -> concrete.Conf:
    roots = set(c.env.values())
    for f in c.kont:
        roots |= set(f.env.values())
    seen = set(roots)
    work = list(roots)
    while work:
        a = work.pop()
        v = c.store.get(a)
        if isinstance(v, concrete.Clo):
            for b in v.env.values():
                if b not in seen:
                    seen.add(b)
                    work.append(b)
    store = {a: v for a, v in c.store.items() if a in seen}
    return concrete.Conf(c.exp, c.env, store, c.kont)


def _kind_of(c1: concrete.Conf, c2: concrete.Conf) -> str:
    d = len(c2.kont) - len(c1.kont)
    return "push" if d > 0 else ("pop" if d < 0 else "eps")


def soundness_harness(program: Program, cfg: AnalysisConfig,
                      fuel: int = 100_000, precomputed=None) -> HarnessResult:
    """Check that the analysis covers the concrete run step by step.

    For every concrete transition the analysis must contain an edge of
    the same stack-action kind whose endpoints cover the abstractions of
    the concrete configurations (projected to control states).  With
    garbage collection the concrete stores are first restricted to their
    live part, mirroring what collection removes abstractly.

    ``precomputed`` substitutes an already-run analysis result (used to
    check that the harness rejects corrupted analyses).
    """
    run = concrete.run(program.root, fuel)
    full = precomputed if precomputed is not None else run_analysis_full(program, cfg)
    partial = full.report.outcome == "boundExceeded"

    if cfg.pushdown:
        nodes = full.dsg.nodes
        edge_index: dict = {}
        for (u, act, v) in full.dsg.edges:
            kind = ("push" if isinstance(act, PushAction)
                    else "pop" if isinstance(act, PopAction) else "eps")
            edge_index.setdefault((u.exp.uid, kind, v.exp.uid), []).append((u, v))
        node_index: dict = {}
        for q in nodes:
            node_index.setdefault(q.exp.uid, []).append(q)
    else:
        node_index = {}
        for q in full.states:
            node_index.setdefault(q.exp.uid, []).append(q)
        edge_index = {}
        for (u, kind, v) in full.edges:
            edge_index.setdefault((u.exp.uid, kind, v.exp.uid), []).append((u, v))

    policy = cfg.policy
    log = run.alloc_log

    def abstract_of(c: concrete.Conf):
        base = _live_restrict(c) if cfg.gc else c
        return abstract.alpha(base, policy, log)

    def covered_by(ac: AbsConf, q) -> bool:
        return (abstract.leq_env(ac.env, q.env)
                and abstract.leq_store(ac.store, q.store))

    def state_covered(ac: AbsConf) -> bool:
        return any(covered_by(ac, q) for q in node_index.get(ac.exp.uid, ()))

    alphas = [abstract_of(c) for c in run.trace]

    for i, ac in enumerate(alphas):
        if not state_covered(ac):
            if partial:
                return HarnessResult(False, None, i, "state not covered (partial analysis)",
                                     len(run.trace) - 1)
            return HarnessResult(False, i, None, "state not covered", len(run.trace) - 1)
        if i + 1 < len(alphas):
            c1, c2 = run.trace[i], run.trace[i + 1]
            kind = _kind_of(c1, c2)
            a1, a2 = alphas[i], alphas[i + 1]
            found = any(covered_by(a1, u) and covered_by(a2, v)
                        for (u, v) in edge_index.get((a1.exp.uid, kind, a2.exp.uid), ()))
            if not found:
                if partial:
                    return HarnessResult(False, None, i, "step not covered (partial analysis)",
                                         len(run.trace) - 1)
                return HarnessResult(False, i, None, "step not covered", len(run.trace) - 1)

    return HarnessResult(True, steps=len(run.trace) - 1)
