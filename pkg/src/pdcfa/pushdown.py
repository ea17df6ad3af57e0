"""Stack actions and pushdown-system views of the abstract machine.

A control state is an (expression, environment, store) triple; stack
characters are frames.  The machine's transition structure is exposed
through oracles instead of enumerated transition tables: the state space
contains stores, so only the frontier queried by a solver is ever
materialized.

The introspective oracle additionally receives the set of frames on some
realizable stack at the queried state and garbage-collects against it
before stepping; frame order is irrelevant for root computation, which
is what makes the set representation sufficient.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import Exp, Program
from . import abstract
from .abstract import AbsConf, AbsEnv, AbsFrame, AbsStore, KCfa
from .gc import reachable_from


# ---------------------------------------------------------------------------
# Stack actions
# ---------------------------------------------------------------------------

class StackAction:
    __slots__ = ("skey", "_hash")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other


class EpsAction(StackAction):
    __slots__ = ()

    def __repr__(self):
        return "Eps"


class PushAction(StackAction):
    __slots__ = ("frame",)

    def __repr__(self):
        return f"Push({self.frame!r})"


class PopAction(StackAction):
    __slots__ = ("frame",)

    def __repr__(self):
        return f"Pop({self.frame!r})"


EPS = EpsAction()
EPS.skey = (0,)
EPS._hash = hash((0,))

_push_table: dict = {}
_pop_table: dict = {}


def push(frame: AbsFrame) -> PushAction:
    a = _push_table.get(frame)
    if a is None:
        a = PushAction()
        a.frame = frame
        a.skey = (1, frame.skey)
        a._hash = hash(a.skey)
        _push_table[frame] = a
    return a


def pop(frame: AbsFrame) -> PopAction:
    a = _pop_table.get(frame)
    if a is None:
        a = PopAction()
        a.frame = frame
        a.skey = (2, frame.skey)
        a._hash = hash(a.skey)
        _pop_table[frame] = a
    return a


def net(actions) -> tuple[StackAction, ...]:
    """Cancel adjacent matching push-pop pairs and drop epsilons.

    The result is the unique normal form of the input under those two
    rewrites.
    """
    out: list[StackAction] = []
    for a in actions:
        if isinstance(a, EpsAction):
            continue
        if (isinstance(a, PopAction) and out
                and isinstance(out[-1], PushAction) and out[-1].frame is a.frame):
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def stackify(actions) -> tuple[AbsFrame, ...] | None:
    """Rebuild the stack a net action string leaves behind (top first).

    Undefined (None) when the net string still contains a pop.
    """
    normal = net(actions)
    frames = []
    for a in normal:
        if isinstance(a, PopAction):
            return None
        frames.append(a.frame)
    return tuple(reversed(frames))


# ---------------------------------------------------------------------------
# Control states
# ---------------------------------------------------------------------------

class ControlState:
    __slots__ = ("exp", "env", "store", "skey", "sid", "_hash")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __repr__(self):
        return f"q(label={self.exp.label}, |store|={len(self.store)})"


_state_table: dict[tuple, ControlState] = {}


def control_state(exp: Exp, env: AbsEnv, store: AbsStore) -> ControlState:
    skey = (exp.uid, env.skey, store.skey)
    q = _state_table.get(skey)
    if q is None:
        q = ControlState()
        q.exp = exp
        q.env = env
        q.store = store
        q.skey = skey
        q.sid = len(_state_table)
        q._hash = hash(skey)
        _state_table[skey] = q
    return q


def state_of_conf(c: AbsConf) -> ControlState:
    return control_state(c.exp, c.env, c.store)


# ---------------------------------------------------------------------------
# NFA (realizable-stack automata live here; built by the solver module)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Nfa:
    """Finite automaton over stack frames; None labels are epsilon moves."""
    states: tuple
    alphabet: tuple
    transitions: tuple  # (state, AbsFrame | None, state)
    start: object
    accepting: frozenset

    def __post_init__(self):
        declared = set(self.states)
        for s, _, t in self.transitions:
            if s not in declared or t not in declared:
                raise ValueError("transition references an undeclared state")

    def successors(self, state, symbol):
        return [t for s, a, t in self.transitions if s is state and a is symbol]

    def accepts_anything(self) -> bool:
        """BFS: is any string (hence any stack) accepted?"""
        seen = {self.start}
        work = [self.start]
        while work:
            s = work.pop()
            if s in self.accepting:
                return True
            for s1, _, t in self.transitions:
                if s1 is s and t not in seen:
                    seen.add(t)
                    work.append(t)
        return False

    def enumerate_strings(self, max_len: int) -> list[tuple]:
        """All accepted frame strings up to the given length (tests only)."""
        out = set()
        work = [(self.start, ())]
        seen = set()
        while work:
            s, word = work.pop()
            if (s, word) in seen:
                continue
            seen.add((s, word))
            if s in self.accepting:
                out.add(word)
            for s1, a, t in self.transitions:
                if s1 is not s:
                    continue
                w2 = word if a is None else word + (a,)
                if len(w2) <= max_len:
                    work.append((t, w2))
        return sorted(out, key=lambda w: (len(w), [f.skey for f in w]))


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RpdsOracle:
    """Rooted pushdown view: transitions queried per state and top frame."""
    root: ControlState
    policy: object
    program: Program
    flow_sink: object = None

    def step_top(self, q: ControlState, top: AbsFrame | None):
        """Eps/push transitions of ``q`` plus pops against ``top``.

        Pop transitions are offered only for the supplied top frame; with
        no frame the state's return values go nowhere.
        """
        return _transitions(q.exp, q.env, q.store, self.policy, top,
                            self.flow_sink)


@dataclass(frozen=True)
class IpdsOracle:
    """Introspective view: garbage-collects against the stack frame set."""
    root: ControlState
    policy: object
    program: Program
    collecting: bool = True
    flow_sink: object = None

    def step_intro(self, q: ControlState, top: AbsFrame | None, frame_set):
        """Transitions of ``q`` after collecting the store.

        ``frame_set`` must cover the frames on some realizable stack at
        ``q``; the queried top frame counts as on the stack automatically.
        """
        env, store = q.env, q.store
        if self.collecting:
            roots = set(env.range())
            for f in frame_set:
                roots |= f.env.range()
            if top is not None:
                roots |= top.env.range()
            keep = reachable_from(roots, store)
            store = abstract.store_restrict(store, keep)
        return _transitions(q.exp, env, store, self.policy, top, self.flow_sink)


def _transitions(exp, env, store, policy, top, flow_sink):
    parts = abstract.step_parts(exp, env, store, policy, (), flow_sink)
    out = []
    for (e, r, s) in parts.eps:
        out.append((EPS, control_state(e, r, s)))
    for frame, (e, r, s) in parts.pushes:
        out.append((push(frame), control_state(e, r, s)))
    if parts.ret is not None and top is not None:
        body, env2 = abstract.pop_step(parts.ret, exp.label, top, policy,
                                       (), flow_sink)
        a = env2.lookup(top.binder)
        store2 = abstract.store_bind(store, a, parts.ret)
        out.append((pop(top), control_state(body, env2, store2)))
    return out


def _check_policy(policy):
    if isinstance(policy, KCfa) and policy.k > 1:
        raise ValueError(
            "pushdown analyses support state-local allocation only (k <= 1); "
            "use the finite baseline for deeper contexts")


def to_rpds(program: Program, policy, flow_sink=None) -> RpdsOracle:
    """View a program's abstract machine as a rooted pushdown system."""
    _check_policy(policy)
    c0 = abstract.inject(program.root)
    return RpdsOracle(state_of_conf(c0), policy, program, flow_sink)


def to_ipds(program: Program, policy, flow_sink=None) -> IpdsOracle:
    """Introspective system with garbage collection folded into every step."""
    _check_policy(policy)
    c0 = abstract.inject(program.root)
    return IpdsOracle(state_of_conf(c0), policy, program, True, flow_sink)


def rpds_as_ipds(oracle: RpdsOracle) -> IpdsOracle:
    """Lift a plain rooted system to the introspective interface.

    The frame set is ignored: no collection happens.
    """
    return IpdsOracle(oracle.root, oracle.policy, oracle.program, False,
                      oracle.flow_sink)
