"""Dyck state graph construction.

Two solvers compile an introspective pushdown oracle into an explicit
graph of control states and stack-action edges:

``naive_solve``
    The reference fixed point.  Each round recomputes every node's
    realizable top frames and stack frame set from scratch on the frozen
    graph of the previous round, queries the oracle for every node, and
    adds whatever appears.  Edges added in round i become visible in
    round i+1.

``summarize``
    The worklist engine.  It maintains per-node epsilon-summaries
    (balanced-path predecessors), top-frame and stack-frame caches, and
    propagates changes incrementally.  Queries are grouped into
    generations whose visibility matches the naive rounds exactly, so
    both solvers return identical graphs, including under node caps.

Stacks at a node form a regular language; ``stacks_nfa`` reads the
automaton for it off the graph (push edges become frame transitions,
balanced path pairs become epsilon transitions).
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass

from .pushdown import (
    ControlState, EpsAction, IpdsOracle, Nfa, PopAction, PushAction,
)


@dataclass(frozen=True)
class Bounds:
    max_nodes: int = 50_000
    max_iters: int = 100_000
    wall_clock: float | None = None


@dataclass(frozen=True)
class Dsg:
    nodes: frozenset
    alphabet: frozenset           # frames appearing on push/pop edges
    edges: frozenset              # (ControlState, StackAction, ControlState)
    root: ControlState

    def node_count(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class NodeCaches:
    top_frames: dict              # ControlState -> frozenset[AbsFrame]
    stack_frames: dict            # ControlState -> frozenset[AbsFrame]


@dataclass(frozen=True)
class SolveResult:
    dsg: Dsg
    outcome: str                  # "complete" | "boundExceeded"
    rounds: int
    eps: dict | None = None       # ControlState -> frozenset of eps-predecessors
    caches: NodeCaches | None = None


def _frame_key(f):
    return f.skey


def _edge_sort_key(e):
    u, a, v = e
    return (u.skey, a.skey, v.skey)


# ---------------------------------------------------------------------------
# From-scratch level analysis (used by the naive solver and the NFA reader)
# ---------------------------------------------------------------------------

class _Levels:
    """Balanced-path pairs plus derived top-frame/frame-set data."""

    def __init__(self, nodes, edges):
        push_in = {q: [] for q in nodes}
        push_out = {q: [] for q in nodes}
        pop_out = {q: [] for q in nodes}
        eps_edges = []
        for (u, act, v) in edges:
            if isinstance(act, PushAction):
                push_in[v].append((u, act.frame))
                push_out[u].append((act.frame, v))
            elif isinstance(act, PopAction):
                pop_out[u].append((act.frame, v))
            else:
                eps_edges.append((u, v))

        succ = {q: set() for q in nodes}
        pred = {q: set() for q in nodes}
        work = deque()

        def add(a, b):
            if b not in succ[a]:
                succ[a].add(b)
                pred[b].add(a)
                work.append((a, b))

        for q in nodes:
            add(q, q)
        for (u, v) in eps_edges:
            add(u, v)
        while work:
            a, b = work.popleft()
            for x in list(pred[a]):
                add(x, b)
            for y in list(succ[b]):
                add(a, y)
            for (x, f) in push_in[a]:
                for (f2, y) in pop_out[b]:
                    if f2 is f:
                        add(x, y)

        tops = {q: set() for q in nodes}
        for q in nodes:
            for (_, f) in push_in[q]:
                for s in succ[q]:
                    tops[s].add(f)

        frames = {q: set() for q in nodes}
        fwork = deque()

        def grow(v, fs):
            delta = fs - frames[v]
            if delta:
                frames[v] |= delta
                fwork.append((v, delta))

        for q in nodes:
            for (u, f) in push_in[q]:
                grow(q, frames[u] | {f})
        while fwork:
            u, delta = fwork.popleft()
            for w in succ[u]:
                if w is not u:
                    grow(w, delta)
            for (f, w) in push_out[u]:
                grow(w, delta | {f})

        self.succ = succ
        self.pred = pred
        self.tops = tops
        self.frames = frames
        self.push_in = push_in


def _dsg_of(nodes, edges, root) -> Dsg:
    alphabet = set()
    for (_, act, _) in edges:
        if isinstance(act, (PushAction, PopAction)):
            alphabet.add(act.frame)
    return Dsg(frozenset(nodes), frozenset(alphabet), frozenset(edges), root)


# ---------------------------------------------------------------------------
# Naive fixed point
# ---------------------------------------------------------------------------

def _query(oracle: IpdsOracle, q, tops, frame_set):
    """One node's oracle results: eps/push always, pops per realizable top."""
    results = dict.fromkeys(oracle.step_intro(q, None, frame_set))
    for f in sorted(tops, key=_frame_key):
        for r in oracle.step_intro(q, f, frame_set):
            results[r] = None
    return results


def naive_solve(oracle: IpdsOracle, bounds: Bounds = Bounds()) -> SolveResult:
    """Round-based least fixed point; the solver the others are tested against."""
    root = oracle.root
    nodes: dict = {root: None}
    edges: dict = {}
    outcome = "complete"
    rounds = 0
    started = time.monotonic()

    while True:
        if rounds >= bounds.max_iters:
            outcome = "boundExceeded"
            break
        if bounds.wall_clock is not None and time.monotonic() - started > bounds.wall_clock:
            outcome = "boundExceeded"
            break
        rounds += 1
        lv = _Levels(nodes, edges)
        grew = False
        for q in list(nodes):
            fs = frozenset(lv.frames[q])
            for (act, q2) in _query(oracle, q, lv.tops[q], fs):
                if q2 not in nodes:
                    nodes[q2] = None
                    grew = True
                edge = (q, act, q2)
                if edge not in edges:
                    edges[edge] = None
                    grew = True
        if not grew:
            break
        if len(nodes) > bounds.max_nodes:
            outcome = "boundExceeded"
            break

    return SolveResult(_dsg_of(nodes, edges, root), outcome, rounds)


# ---------------------------------------------------------------------------
# Worklist summarization
# ---------------------------------------------------------------------------

class _Summarizer:
    def __init__(self, oracle: IpdsOracle):
        self.oracle = oracle
        self.nodes: dict = {}
        self.edges: dict = {}
        # live truth for the current graph
        self.sl_succ: dict = {}
        self.sl_pred: dict = {}
        self.tops: dict = {}
        self.frames: dict = {}
        self.push_in: dict = {}
        self.push_out: dict = {}
        self.pop_out: dict = {}
        # per-generation snapshots driving the queries
        self.vis_tops: dict = {}
        self.vis_frames: dict = {}
        self.changed: dict = {}
        self.new_nodes: dict = {}
        self._pairs = deque()
        self.add_node(oracle.root)

    def add_node(self, q):
        if q in self.nodes:
            return
        self.nodes[q] = None
        self.sl_succ[q] = {q}
        self.sl_pred[q] = {q}
        self.tops[q] = set()
        self.frames[q] = set()
        self.push_in[q] = []
        self.push_out[q] = []
        self.pop_out[q] = []
        self.new_nodes[q] = None

    def mark(self, q):
        self.changed[q] = None

    def add_edge(self, u, act, v):
        edge = (u, act, v)
        if edge in self.edges:
            return
        self.add_node(v)
        self.edges[edge] = None
        if isinstance(act, EpsAction):
            self.queue_pair(u, v)
        elif isinstance(act, PushAction):
            f = act.frame
            self.push_in[v].append((u, f))
            self.push_out[u].append((f, v))
            for s in list(self.sl_succ[v]):
                self.top_add(s, f)
            self.frames_grow(v, self.frames[u] | {f})
            for b in list(self.sl_succ[v]):
                for (f2, y) in self.pop_out[b]:
                    if f2 is f:
                        self.queue_pair(u, y)
        else:
            f = act.frame
            self.pop_out[u].append((f, v))
            for b in list(self.sl_pred[u]):
                for (x, f2) in self.push_in[b]:
                    if f2 is f:
                        self.queue_pair(x, v)
        self.drain_pairs()

    def queue_pair(self, a, b):
        if b not in self.sl_succ[a]:
            self.sl_succ[a].add(b)
            self.sl_pred[b].add(a)
            self._pairs.append((a, b))

    def drain_pairs(self):
        while self._pairs:
            a, b = self._pairs.popleft()
            # transitive closure around the new balanced pair
            for x in list(self.sl_pred[a]):
                self.queue_pair(x, b)
            for y in list(self.sl_succ[b]):
                self.queue_pair(a, y)
            # pushes into a now reach b's pops; and their frames top b
            for (x, f) in self.push_in[a]:
                self.top_add(b, f)
                for (f2, y) in self.pop_out[b]:
                    if f2 is f:
                        self.queue_pair(x, y)
            self.frames_grow(b, self.frames[a])

    def top_add(self, q, f):
        if f not in self.tops[q]:
            self.tops[q].add(f)
            self.mark(q)

    def frames_grow(self, q, fs):
        work = deque([(q, fs)])
        while work:
            u, fs_in = work.popleft()
            delta = fs_in - self.frames[u]
            if not delta:
                continue
            self.frames[u] |= delta
            self.mark(u)
            for w in self.sl_succ[u]:
                if w is not u:
                    work.append((w, delta))
            for (f, w) in self.push_out[u]:
                work.append((w, delta | {f}))

    def run(self, bounds: Bounds) -> SolveResult:
        outcome = "complete"
        generations = 0
        started = time.monotonic()
        queue = self._refresh_boundary()  # boundary zero: the root
        while queue:
            if generations >= bounds.max_iters:
                outcome = "boundExceeded"
                break
            if bounds.wall_clock is not None and time.monotonic() - started > bounds.wall_clock:
                outcome = "boundExceeded"
                break
            generations += 1
            for q in queue:
                fs = self.vis_frames[q]
                for (act, q2) in _query(self.oracle, q, self.vis_tops[q], fs):
                    self.add_edge(q, act, q2)
            queue = self._refresh_boundary()
            if len(self.nodes) > bounds.max_nodes:
                outcome = "boundExceeded"
                break

        eps = {}
        for q in self.nodes:
            preds = frozenset(p for p in self.sl_pred[q] if p is not q)
            if preds:
                eps[q] = preds
        caches = NodeCaches(
            top_frames={q: frozenset(self.tops[q]) for q in self.nodes},
            stack_frames={q: frozenset(self.frames[q]) for q in self.nodes},
        )
        return SolveResult(_dsg_of(self.nodes, self.edges, self.oracle.root),
                           outcome, generations, eps, caches)

    def _refresh_boundary(self):
        """Snapshot changed caches; dirty nodes form the next generation."""
        dirty: dict = {}
        for q in self.new_nodes:
            self.vis_tops[q] = frozenset(self.tops[q])
            self.vis_frames[q] = frozenset(self.frames[q])
            dirty[q] = None
        for q in self.changed:
            if q in dirty:
                continue
            t = frozenset(self.tops[q])
            f = frozenset(self.frames[q])
            if t != self.vis_tops[q] or f != self.vis_frames[q]:
                self.vis_tops[q] = t
                self.vis_frames[q] = f
                dirty[q] = None
        self.new_nodes = {}
        self.changed = {}
        # FIFO order with stable, reproducible tie-breaking
        return sorted(dirty, key=lambda q: q.sid)


def summarize(oracle: IpdsOracle, bounds: Bounds = Bounds()) -> SolveResult:
    """Incremental solver; equal to ``naive_solve`` by construction."""
    return _Summarizer(oracle).run(bounds)


# ---------------------------------------------------------------------------
# Stacks automata
# ---------------------------------------------------------------------------

def _levels_of(dsg: Dsg) -> _Levels:
    return _Levels(set(dsg.nodes), dsg.edges)


def stacks_nfa(g: Dsg, s: ControlState, levels: _Levels | None = None) -> Nfa:
    """Automaton of realizable stacks at ``s``.

    Accepted strings spell stacks bottom-up; reverse an accepted string
    for the top-at-head stack.  Push edges read their frame, balanced
    path pairs move silently.
    """
    if s not in g.nodes:
        raise KeyError(f"state not in graph: {s!r}")
    lv = levels or _levels_of(g)
    nodes = sorted(g.nodes, key=lambda q: q.skey)
    transitions = []
    for (u, act, v) in sorted(g.edges, key=_edge_sort_key):
        if isinstance(act, PushAction):
            transitions.append((u, act.frame, v))
    for u in nodes:
        for v in sorted(lv.succ[u], key=lambda q: q.skey):
            if v is not u:
                transitions.append((u, None, v))
    alphabet = sorted({t[1] for t in transitions if t[1] is not None},
                      key=_frame_key)
    return Nfa(tuple(nodes), tuple(alphabet), tuple(transitions), g.root,
               frozenset([s]))


def realizable_stacks(g: Dsg, s: ControlState, max_len: int = 6) -> list[tuple]:
    """Stacks (top frame first) realizable at ``s`` up to a depth bound."""
    nfa = stacks_nfa(g, s)
    return [tuple(reversed(w)) for w in nfa.enumerate_strings(max_len)]


def frame_set_of(g: Dsg, caches: NodeCaches | None, s: ControlState) -> frozenset:
    """All frames that can sit on a realizable stack at ``s``."""
    if caches is not None and s in caches.stack_frames:
        return caches.stack_frames[s]
    if s not in g.nodes:
        raise KeyError(f"state not in graph: {s!r}")
    lv = _levels_of(g)
    return frozenset(lv.frames[s])


def legal_node_set(g: Dsg) -> frozenset:
    """Nodes whose stacks automaton accepts at least one string.

    One reachability pass answers the question for every node at once:
    a node accepts something exactly when the automaton structure can
    reach it from the root.
    """
    lv = _levels_of(g)
    seen = {g.root}
    work = [g.root]
    push_out = {q: [] for q in g.nodes}
    for (u, act, v) in g.edges:
        if isinstance(act, PushAction):
            push_out[u].append(v)
    while work:
        u = work.pop()
        for v in lv.succ[u]:
            if v not in seen:
                seen.add(v)
                work.append(v)
        for v in push_out[u]:
            if v not in seen:
                seen.add(v)
                work.append(v)
    return frozenset(seen)
