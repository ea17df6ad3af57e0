"""Abstract CESK machine: finite addresses, set-valued stores, unbounded stack.

Environments, stores, value sets, frames and configurations are
hash-consed immutable values.  Every interned object carries ``skey``, a
nested tuple over ints and strings that orders and identifies it without
relying on memory addresses, so analysis results are reproducible across
processes.

The allocation policy decides the address space and with it the
polyvariance of any analysis built on top of the machine.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    Atom, Exp, If, Lam, Let, Lit, PrimRef, Return, TailCall, Var,
)
from . import concrete


# ---------------------------------------------------------------------------
# Allocation policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mono:
    """Monovariant: one address per variable."""

    def describe(self) -> str:
        return "mono"


@dataclass(frozen=True)
class OneCfa:
    """Context-sensitive: variable paired with the allocating expression."""

    def describe(self) -> str:
        return "1cfa"


@dataclass(frozen=True)
class PolySplit:
    """Polymorphic splitting: split at applications of let-bound lambdas."""

    def describe(self) -> str:
        return "poly"


@dataclass(frozen=True)
class KCfa:
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")

    def describe(self) -> str:
        return f"{self.k}cfa"


Policy = object  # Mono | OneCfa | PolySplit | KCfa


# ---------------------------------------------------------------------------
# Addresses
# ---------------------------------------------------------------------------

class AbsAddr:
    __slots__ = ("skey", "_hash")

    def __init__(self, skey):
        self.skey = skey
        self._hash = hash(skey)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    @property
    def var(self) -> str:
        return self.skey[1]

    def __repr__(self):
        return f"Addr{self.skey!r}"


_addr_table: dict[tuple, AbsAddr] = {}


def _addr(skey) -> AbsAddr:
    a = _addr_table.get(skey)
    if a is None:
        a = AbsAddr(skey)
        _addr_table[skey] = a
    return a


def addr_mono(v: str) -> AbsAddr:
    return _addr((0, v))


def addr_ctx1(v: str, label: int) -> AbsAddr:
    return _addr((1, v, label))


def addr_poly(v: str, label: int | None) -> AbsAddr:
    return _addr((2, v, -1 if label is None else label))


def addr_ctxk(v: str, labels: tuple[int, ...]) -> AbsAddr:
    return _addr((3, v, labels))


def alloc(v: str, conf: "AbsConf", policy, history: tuple[int, ...] = (),
          applied: Lam | None = None) -> AbsAddr:
    """Abstract allocator; dispatches on the policy.

    ``history`` holds recent expression labels, current state first; KCfa
    truncates it to its k.  ``applied`` is the lambda being entered when
    the allocation happens at a call.
    """
    return alloc_at(v, conf.exp.label, policy, history, applied)


def alloc_at(v: str, label: int, policy, history: tuple[int, ...] = (),
             applied: Lam | None = None) -> AbsAddr:
    if isinstance(policy, Mono):
        return addr_mono(v)
    if isinstance(policy, OneCfa):
        return addr_ctx1(v, label)
    if isinstance(policy, PolySplit):
        if applied is not None and applied.let_bound:
            return addr_poly(v, label)
        return addr_poly(v, None)
    if isinstance(policy, KCfa):
        if policy.k == 0:
            return addr_ctxk(v, ())
        hist = history if history else (label,)
        return addr_ctxk(v, hist[:policy.k])
    raise TypeError(f"unknown policy {policy!r}")


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------

class AbsVal:
    __slots__ = ("skey", "_hash")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other


class AbsClo(AbsVal):
    __slots__ = ("lam", "env")

    def __repr__(self):
        return f"AbsClo({self.lam.show()})"


class AbsNum(AbsVal):
    __slots__ = ()

    def __repr__(self):
        return "AbsNum"


class AbsBool(AbsVal):
    __slots__ = ()

    def __repr__(self):
        return "AbsBool"


class AbsPrim(AbsVal):
    __slots__ = ("op",)

    def __repr__(self):
        return f"AbsPrim({self.op})"


def _make_leaf(cls, skey):
    v = cls()
    v.skey = skey
    v._hash = hash(skey)
    return v


ABS_NUM = _make_leaf(AbsNum, (1,))
ABS_BOOL = _make_leaf(AbsBool, (2,))
_prim_table: dict[str, AbsPrim] = {}
_clo_table: dict[tuple, AbsClo] = {}


def abs_prim(op: str) -> AbsPrim:
    p = _prim_table.get(op)
    if p is None:
        p = _make_leaf(AbsPrim, (3, op))
        p.op = op
        _prim_table[op] = p
    return p


def abs_clo(lam: Lam, env: "AbsEnv") -> AbsClo:
    skey = (0, lam.uid, env.skey)
    c = _clo_table.get(skey)
    if c is None:
        c = AbsClo()
        c.skey = skey
        c._hash = hash(skey)
        c.lam = lam
        c.env = env
        _clo_table[skey] = c
    return c


# ---------------------------------------------------------------------------
# Environments, value sets, stores
# ---------------------------------------------------------------------------

class AbsEnv:
    __slots__ = ("items", "map", "skey", "_hash", "_range")

    def lookup(self, v: str) -> AbsAddr | None:
        return self.map.get(v)

    def bind(self, pairs) -> "AbsEnv":
        m = dict(self.map)
        for v, a in pairs:
            m[v] = a
        return abs_env(m.items())

    def range(self) -> frozenset[AbsAddr]:
        if self._range is None:
            self._range = frozenset(a for _, a in self.items)
        return self._range

    def domain(self):
        return self.map.keys()

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __repr__(self):
        return "AbsEnv{" + ", ".join(f"{v}" for v, _ in self.items) + "}"


_env_table: dict[tuple, AbsEnv] = {}


def abs_env(pairs=()) -> AbsEnv:
    items = tuple(sorted(pairs, key=lambda p: p[0]))
    skey = tuple((v, a.skey) for v, a in items)
    e = _env_table.get(skey)
    if e is None:
        e = AbsEnv()
        e.items = items
        e.map = dict(items)
        e.skey = skey
        e._hash = hash(skey)
        e._range = None
        _env_table[skey] = e
    return e


EMPTY_ENV = abs_env()


class Vals:
    """An interned, canonically ordered set of abstract values."""

    __slots__ = ("items", "frozen", "skey", "_hash")

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __contains__(self, v):
        return v in self.frozen

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def issubset(self, other: "Vals") -> bool:
        return self.frozen <= other.frozen

    def __repr__(self):
        return "Vals{" + ", ".join(map(repr, self.items)) + "}"


_vals_table: dict[tuple, Vals] = {}


def vals(values) -> Vals:
    items = tuple(sorted(set(values), key=lambda v: v.skey))
    skey = tuple(v.skey for v in items)
    vs = _vals_table.get(skey)
    if vs is None:
        vs = Vals()
        vs.items = items
        vs.frozen = frozenset(items)
        vs.skey = skey
        vs._hash = hash(skey)
        _vals_table[skey] = vs
    return vs


EMPTY_VALS = vals(())


def vals_union(a: Vals, b: Vals) -> Vals:
    if a is b or not b.items:
        return a
    if not a.items:
        return b
    if b.frozen <= a.frozen:
        return a
    return vals(a.items + b.items)


class AbsStore:
    __slots__ = ("items", "map", "skey", "_hash")

    def get(self, a: AbsAddr) -> Vals:
        return self.map.get(a, EMPTY_VALS)

    def domain(self):
        return self.map.keys()

    def __len__(self):
        return len(self.items)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __repr__(self):
        return f"AbsStore({len(self.items)} addrs)"


_store_table: dict[tuple, AbsStore] = {}


def abs_store(pairs=()) -> AbsStore:
    clean = [(a, vs) for a, vs in pairs if vs.items]
    items = tuple(sorted(clean, key=lambda p: p[0].skey))
    skey = tuple((a.skey, vs.skey) for a, vs in items)
    s = _store_table.get(skey)
    if s is None:
        s = AbsStore()
        s.items = items
        s.map = dict(items)
        s.skey = skey
        s._hash = hash(skey)
        _store_table[skey] = s
    return s


EMPTY_STORE = abs_store()


def store_join(s1: AbsStore, s2: AbsStore) -> AbsStore:
    """Pointwise union of two stores."""
    if s1 is s2 or not s2.items:
        return s1
    if not s1.items:
        return s2
    m = dict(s1.map)
    for a, vs in s2.items:
        cur = m.get(a)
        m[a] = vs if cur is None else vals_union(cur, vs)
    return abs_store(m.items())


def store_bind(s: AbsStore, a: AbsAddr, vs: Vals) -> AbsStore:
    """Join a single binding into the store."""
    if not vs.items:
        return s
    cur = s.map.get(a)
    if cur is not None:
        merged = vals_union(cur, vs)
        if merged is cur:
            return s
        vs = merged
    m = dict(s.map)
    m[a] = vs
    return abs_store(m.items())


def store_restrict(s: AbsStore, keep) -> AbsStore:
    """Drop bindings whose address is not in ``keep``."""
    if all(a in keep for a, _ in s.items):
        return s
    return abs_store((a, vs) for a, vs in s.items if a in keep)


# ---------------------------------------------------------------------------
# Frames and configurations
# ---------------------------------------------------------------------------

class AbsFrame:
    __slots__ = ("binder", "body", "env", "skey", "_hash")

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self is other

    def __repr__(self):
        return f"AbsFrame({self.binder}@{self.body.label})"


_frame_table: dict[tuple, AbsFrame] = {}


def abs_frame(binder: str, body: Exp, env: AbsEnv) -> AbsFrame:
    skey = (binder, body.uid, env.skey)
    f = _frame_table.get(skey)
    if f is None:
        f = AbsFrame()
        f.binder = binder
        f.body = body
        f.env = env
        f.skey = skey
        f._hash = hash(skey)
        _frame_table[skey] = f
    return f


@dataclass(frozen=True)
class AbsConf:
    exp: Exp
    env: AbsEnv
    store: AbsStore
    kont: tuple  # AbsFrame tuple, top at the head

    def __repr__(self):
        return f"AbsConf(label={self.exp.label}, |store|={len(self.store)}, depth={len(self.kont)})"


def inject(e: Exp) -> AbsConf:
    return AbsConf(e, EMPTY_ENV, EMPTY_STORE, ())


def atomic_eval(ae: Atom, env: AbsEnv, store: AbsStore) -> Vals:
    """Abstract atomic evaluation; a set of values.

    A variable bound in the environment but absent from the store denotes
    dead code and evaluates to the empty set.  An unbound variable is a
    program error.
    """
    if isinstance(ae, Var):
        a = env.lookup(ae.name)
        if a is None:
            raise KeyError(f"unbound variable {ae.name!r}")
        return store.get(a)
    if isinstance(ae, Lam):
        return vals((abs_clo(ae, env),))
    if isinstance(ae, Lit):
        return vals((ABS_BOOL if isinstance(ae.value, bool) else ABS_NUM,))
    if isinstance(ae, PrimRef):
        return vals((abs_prim(ae.op),))
    raise TypeError(f"not an atom: {ae!r}")


def prim_delta(op: str, args: list[Vals]) -> Vals:
    """Abstract primitive application over operand value sets."""
    if op == "print":
        return args[0] if len(args) == 1 else EMPTY_VALS
    if len(args) != 2:
        return EMPTY_VALS
    if ABS_NUM in args[0] and ABS_NUM in args[1]:
        if op in ("+", "-", "*"):
            return vals((ABS_NUM,))
        if op in ("<=", "="):
            return vals((ABS_BOOL,))
    return EMPTY_VALS


# ---------------------------------------------------------------------------
# Transition kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepParts:
    """Stack-independent decomposition of a configuration's transitions.

    ``eps``    — successors that leave the stack alone;
    ``pushes`` — (frame, successor) pairs for non-tail calls;
    ``ret``    — value set this state returns (drives the pop rule), or
                 None when the state is not a return point.
    """
    eps: tuple
    pushes: tuple
    ret: Vals | None


def step_parts(exp: Exp, env: AbsEnv, store: AbsStore, policy,
               history: tuple[int, ...] = (), flow_sink=None) -> StepParts:
    label = exp.label
    hist = (label,) + history[:concrete.HISTORY_DEPTH - 1] if history else (label,)

    def flow(var, vs):
        if flow_sink is not None:
            flow_sink(var, vs)

    if isinstance(exp, Let):
        call = exp.rhs
        if isinstance(call.operator, PrimRef):
            try:
                args = [atomic_eval(a, env, store) for a in call.operands]
            except KeyError:
                return StepParts((), (), None)
            out = prim_delta(call.operator.op, args)
            if not out.items:
                return StepParts((), (), None)
            a = alloc_at(exp.binder, label, policy, hist, None)
            flow(exp.binder, out)
            succ = (exp.body, env.bind(((exp.binder, a),)), store_bind(store, a, out))
            return StepParts((succ,), (), None)
        frame = abs_frame(exp.binder, exp.body, env)
        return StepParts((), ((frame, (exp.rhs_exp, env, store)),), None)

    if isinstance(exp, TailCall):
        call = exp.call
        try:
            fvals = atomic_eval(call.operator, env, store)
            argsets = [atomic_eval(a, env, store) for a in call.operands]
        except KeyError:
            return StepParts((), (), None)
        eps = []
        ret: Vals | None = None
        for fv in fvals:
            if isinstance(fv, AbsClo):
                lam = fv.lam
                if len(lam.formals) != len(argsets):
                    continue
                if any(not vs.items for vs in argsets):
                    continue
                st = store
                binds = []
                for v, vs in zip(lam.formals, argsets):
                    a = alloc_at(v, label, policy, hist, lam)
                    st = store_bind(st, a, vs)
                    binds.append((v, a))
                    flow(v, vs)
                eps.append((lam.body, fv.env.bind(binds), st))
            elif isinstance(fv, AbsPrim):
                out = prim_delta(fv.op, argsets)
                if out.items:
                    ret = out if ret is None else vals_union(ret, out)
        return StepParts(tuple(eps), (), ret)

    if isinstance(exp, Return):
        try:
            out = atomic_eval(exp.atom, env, store)
        except KeyError:
            return StepParts((), (), None)
        return StepParts((), (), out if out.items else None)

    if isinstance(exp, If):
        try:
            test = atomic_eval(exp.cond, env, store)
        except KeyError:
            return StepParts((), (), None)
        eps = []
        if ABS_BOOL in test:
            eps.append((exp.then, env, store))
            eps.append((exp.orelse, env, store))
        return StepParts(tuple(eps), (), None)

    raise TypeError(f"unknown expression form {type(exp).__name__}")


def pop_step(ret: Vals, ret_label: int, frame: AbsFrame, policy,
             history: tuple[int, ...] = (), flow_sink=None):
    """Apply the return rule: bind the returned values into the frame."""
    hist = (ret_label,) + history[:concrete.HISTORY_DEPTH - 1] if history else (ret_label,)
    a = alloc_at(frame.binder, ret_label, policy, hist, None)
    if flow_sink is not None:
        flow_sink(frame.binder, ret)
    env2 = frame.env.bind(((frame.binder, a),))
    return frame.body, env2


def step(conf: AbsConf, policy, history: tuple[int, ...] = (),
         flow_sink=None) -> list[AbsConf]:
    """All successors of an abstract configuration, deterministically ordered."""
    parts = step_parts(conf.exp, conf.env, conf.store, policy, history, flow_sink)
    out = [AbsConf(e, r, s, conf.kont) for (e, r, s) in parts.eps]
    for frame, (e, r, s) in parts.pushes:
        out.append(AbsConf(e, r, s, (frame,) + conf.kont))
    if parts.ret is not None and conf.kont:
        frame, rest = conf.kont[0], conf.kont[1:]
        body, env2 = pop_step(parts.ret, conf.exp.label, frame, policy,
                              history, flow_sink)
        a = env2.lookup(frame.binder)
        store2 = store_bind(conf.store, a, parts.ret)
        out.append(AbsConf(body, env2, store2, rest))
    return out


# ---------------------------------------------------------------------------
# Partial orders
# ---------------------------------------------------------------------------

def leq_env(e1: AbsEnv, e2: AbsEnv) -> bool:
    """Environments agree on the smaller domain."""
    if e1 is e2:
        return True
    for v, a in e1.items:
        if e2.map.get(v) is not a:
            return False
    return True


def leq_val(v1: AbsVal, v2: AbsVal) -> bool:
    if v1 is v2:
        return True
    if isinstance(v1, AbsClo) and isinstance(v2, AbsClo):
        return v1.lam is v2.lam and leq_env(v1.env, v2.env)
    return False


def leq_vals(vs1: Vals, vs2: Vals) -> bool:
    return vs1.frozen <= vs2.frozen


def leq_store(s1: AbsStore, s2: AbsStore) -> bool:
    """Pointwise set inclusion."""
    if s1 is s2:
        return True
    for a, vs in s1.items:
        if not vs.frozen <= s2.get(a).frozen:
            return False
    return True


def leq_frame(f1: AbsFrame, f2: AbsFrame) -> bool:
    return (f1 is f2
            or (f1.binder == f2.binder and f1.body is f2.body
                and leq_env(f1.env, f2.env)))


def leq_kont(k1: tuple, k2: tuple) -> bool:
    """Element-wise comparison; different lengths are incomparable."""
    if len(k1) != len(k2):
        return False
    return all(leq_frame(a, b) for a, b in zip(k1, k2))


def leq_conf(c1: AbsConf, c2: AbsConf) -> bool:
    return (c1.exp is c2.exp
            and leq_env(c1.env, c2.env)
            and leq_store(c1.store, c2.store)
            and leq_kont(c1.kont, c2.kont))


def leq(x, y) -> bool:
    """Generic order over the abstract domains (same sort on both sides)."""
    if isinstance(x, AbsEnv):
        return leq_env(x, y)
    if isinstance(x, AbsStore):
        return leq_store(x, y)
    if isinstance(x, Vals):
        return leq_vals(x, y)
    if isinstance(x, AbsVal):
        return leq_val(x, y)
    if isinstance(x, AbsFrame):
        return leq_frame(x, y)
    if isinstance(x, AbsConf):
        return leq_conf(x, y)
    if isinstance(x, tuple):
        return leq_kont(x, y)
    raise TypeError(f"no order defined for {type(x).__name__}")


# ---------------------------------------------------------------------------
# Abstraction map
# ---------------------------------------------------------------------------

def alpha_addr(a: int, policy, alloc_log) -> AbsAddr:
    rec = alloc_log[a]
    applied = _FAKE_LET_BOUND if rec.let_bound else None
    return alloc_at(rec.var, rec.labels[0], policy, rec.labels, applied)


class _Marker:
    let_bound = True


_FAKE_LET_BOUND = _Marker()


def alpha_value(v, policy, alloc_log) -> AbsVal:
    if isinstance(v, concrete.Clo):
        return abs_clo(v.lam, alpha_env(v.env, policy, alloc_log))
    if isinstance(v, concrete.Num):
        return ABS_NUM
    if isinstance(v, concrete.Bool):
        return ABS_BOOL
    if isinstance(v, concrete.PrimVal):
        return abs_prim(v.op)
    raise TypeError(f"not a concrete value: {v!r}")


def alpha_env(env: dict, policy, alloc_log) -> AbsEnv:
    return abs_env((v, alpha_addr(a, policy, alloc_log)) for v, a in env.items())


def alpha_store(store: dict, policy, alloc_log) -> AbsStore:
    m: dict[AbsAddr, list] = {}
    for a, v in store.items():
        m.setdefault(alpha_addr(a, policy, alloc_log), []).append(
            alpha_value(v, policy, alloc_log))
    return abs_store((a, vals(vs)) for a, vs in m.items())


def alpha_frame(f: concrete.Frame, policy, alloc_log) -> AbsFrame:
    return abs_frame(f.binder, f.body, alpha_env(f.env, policy, alloc_log))


def alpha(c: concrete.Conf, policy, alloc_log=None) -> AbsConf:
    """Structural abstraction of a concrete configuration.

    ``alloc_log`` maps every concrete address to its allocation record;
    it is produced by ``concrete.run``.
    """
    log = alloc_log or {}
    return AbsConf(
        c.exp,
        alpha_env(c.env, policy, log),
        alpha_store(c.store, policy, log),
        tuple(alpha_frame(f, policy, log) for f in c.kont),
    )
