"""Concrete CESK machine for the ANF core language.

This is the ground-truth executor used by the soundness tests: a
deterministic small-step machine over (expression, environment, store,
stack) configurations.  Addresses are natural numbers and the allocator
always picks the lowest unused one, so store domains stay dense.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import (
    Atom, Exp, If, Lam, Let, Lit, PrimRef, Return, TailCall, Var,
)


class StuckError(Exception):
    """A configuration with no legal successor (type/arity/scope error)."""


@dataclass(frozen=True)
class Clo:
    lam: Lam
    env: dict  # identifier -> int address

    def __repr__(self):
        return f"Clo({self.lam.show()})"


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class PrimVal:
    op: str


Value = object  # Clo | Num | Bool | PrimVal


@dataclass(frozen=True)
class Frame:
    binder: str
    body: Exp
    env: dict


@dataclass(eq=False)
class Conf:
    exp: Exp
    env: dict            # identifier -> address
    store: dict          # address -> Value
    kont: tuple          # Frame tuple, top at the head


@dataclass(frozen=True)
class AllocRecord:
    """What the allocator knew when it handed out an address.

    ``labels`` is the trace's last few expression labels, most recent
    first; ``let_bound`` is the flag of the applied lambda when the
    allocation happened at a call, else None.  The abstraction map uses
    this to translate concrete addresses into policy addresses.
    """
    var: str
    labels: tuple[int, ...]
    let_bound: bool | None


@dataclass(eq=False)
class RunResult:
    trace: list[Conf]
    outcome: str                     # "final" | "fuelExhausted" | "stuck"
    value: Value | None = None
    reason: str | None = None
    outputs: list[Value] = field(default_factory=list)
    alloc_log: dict[int, AllocRecord] = field(default_factory=dict)


def inject(e: Exp) -> Conf:
    return Conf(e, {}, {}, ())


def atomic_eval(ae: Atom, env: dict, store: dict) -> Value:
    if isinstance(ae, Var):
        if ae.name not in env:
            raise StuckError(f"unbound variable {ae.name!r}")
        addr = env[ae.name]
        if addr not in store:
            raise StuckError(f"dangling address {addr} for {ae.name!r}")
        return store[addr]
    if isinstance(ae, Lam):
        return Clo(ae, env)
    if isinstance(ae, Lit):
        return Bool(ae.value) if isinstance(ae.value, bool) else Num(ae.value)
    if isinstance(ae, PrimRef):
        return PrimVal(ae.op)
    raise StuckError(f"not an atom: {ae!r}")


def alloc(v: str, c: Conf) -> int:
    # 1 + max(dom(store)), with max of the empty domain taken as -1
    return 1 + max(c.store, default=-1)


def prim_delta(op: str, args: list[Value]) -> Value:
    def num(x):
        if not isinstance(x, Num):
            raise StuckError(f"primitive {op} applied to non-number")
        return x.value

    if op == "print":
        if len(args) != 1:
            raise StuckError("print takes one argument")
        return args[0]
    if len(args) != 2:
        raise StuckError(f"primitive {op} takes two arguments")
    a, b = num(args[0]), num(args[1])
    if op == "+":
        return Num(a + b)
    if op == "-":
        return Num(a - b)
    if op == "*":
        return Num(a * b)
    if op == "<=":
        return Bool(a <= b)
    if op == "=":
        return Bool(a == b)
    raise StuckError(f"unknown primitive {op}")


def _returned(c: Conf) -> Value | None:
    """The value this configuration is returning, if it is a return point."""
    if isinstance(c.exp, Return):
        return atomic_eval(c.exp.atom, c.env, c.store)
    if isinstance(c.exp, TailCall) and isinstance(c.exp.call.operator, PrimRef):
        call = c.exp.call
        args = [atomic_eval(a, c.env, c.store) for a in call.operands]
        return prim_delta(call.operator.op, args)
    return None


def _bind(env: dict, store: dict, pairs: list[tuple[str, int, Value]]):
    env2 = dict(env)
    store2 = dict(store)
    for v, a, val in pairs:
        env2[v] = a
        store2[a] = val
    return env2, store2


def step(c: Conf, _sink=None) -> Conf | None:
    """One transition; None when final.  Raises StuckError on errors.

    ``_sink``, when given, is called as ``_sink(var, addr, let_bound)``
    for every allocation the step performs.
    """
    e = c.exp

    def record(v, a, lb):
        if _sink is not None:
            _sink(v, a, lb)

    if isinstance(e, Let):
        call = e.rhs
        if isinstance(call.operator, PrimRef):
            # primitive delta: bind directly, no frame pushed
            args = [atomic_eval(a, c.env, c.store) for a in call.operands]
            val = prim_delta(call.operator.op, args)
            a = alloc(e.binder, c)
            record(e.binder, a, None)
            env2, store2 = _bind(c.env, c.store, [(e.binder, a, val)])
            return Conf(e.body, env2, store2, c.kont)
        frame = Frame(e.binder, e.body, c.env)
        return Conf(e.rhs_exp, c.env, c.store, (frame,) + c.kont)

    if isinstance(e, TailCall):
        call = e.call
        fval = atomic_eval(call.operator, c.env, c.store)
        if isinstance(fval, PrimVal) or isinstance(call.operator, PrimRef):
            op = fval.op if isinstance(fval, PrimVal) else call.operator.op
            args = [atomic_eval(a, c.env, c.store) for a in call.operands]
            val = prim_delta(op, args)
            return _pop(c, val, record)
        if not isinstance(fval, Clo):
            raise StuckError(f"application of a non-procedure at label {e.label}")
        lam = fval.lam
        if len(lam.formals) != len(call.operands):
            raise StuckError(
                f"arity mismatch at label {e.label}: expected "
                f"{len(lam.formals)}, got {len(call.operands)}")
        pairs = []
        store = c.store
        for v, a_exp in zip(lam.formals, call.operands):
            val = atomic_eval(a_exp, c.env, c.store)
            addr = 1 + max(store, default=-1)
            record(v, addr, lam.let_bound)
            store = {**store, addr: val}
            pairs.append((v, addr, val))
        env2 = dict(fval.env)
        for v, addr, _ in pairs:
            env2[v] = addr
        return Conf(lam.body, env2, store, c.kont)

    if isinstance(e, Return):
        val = atomic_eval(e.atom, c.env, c.store)
        return _pop(c, val, record)

    if isinstance(e, If):
        test = atomic_eval(e.cond, c.env, c.store)
        if not isinstance(test, Bool):
            raise StuckError(f"if on a non-boolean at label {e.label}")
        return Conf(e.then if test.value else e.orelse, c.env, c.store, c.kont)

    raise StuckError(f"unknown expression form {type(e).__name__}")


def _pop(c: Conf, val: Value, record) -> Conf | None:
    if not c.kont:
        return None  # final state
    frame, rest = c.kont[0], c.kont[1:]
    a = alloc(frame.binder, c)
    record(frame.binder, a, None)
    env2, store2 = _bind(frame.env, c.store, [(frame.binder, a, val)])
    return Conf(frame.body, env2, store2, rest)


HISTORY_DEPTH = 4  # labels remembered per allocation; covers k <= 4


def run(e: Exp, fuel: int) -> RunResult:
    """Drive the machine from inject(e) for at most ``fuel`` steps."""
    c = inject(e)
    trace = [c]
    outputs: list[Value] = []
    alloc_log: dict[int, AllocRecord] = {}
    result = RunResult(trace, "fuelExhausted")

    for _ in range(fuel):
        cur = c
        history = tuple(t.exp.label for t in reversed(trace[-HISTORY_DEPTH:]))

        def sink(v, a, lb, history=history):
            alloc_log[a] = AllocRecord(v, history, lb)

        # record prints before stepping past them
        exp = cur.exp
        call = None
        if isinstance(exp, TailCall):
            call = exp.call
        elif isinstance(exp, Let) and isinstance(exp.rhs.operator, PrimRef):
            call = exp.rhs
        if call is not None and len(call.operands) == 1:
            try:
                opv = atomic_eval(call.operator, cur.env, cur.store)
            except StuckError:
                opv = None
            if isinstance(opv, PrimVal) and opv.op == "print":
                outputs.append(atomic_eval(call.operands[0], cur.env, cur.store))

        try:
            nxt = step(cur, sink)
        except StuckError as err:
            result.outcome = "stuck"
            result.reason = str(err)
            result.alloc_log = alloc_log
            result.outputs = outputs
            return result
        if nxt is None:
            result.outcome = "final"
            result.value = _returned(cur)
            result.alloc_log = alloc_log
            result.outputs = outputs
            return result
        c = nxt
        trace.append(c)

    result.alloc_log = alloc_log
    result.outputs = outputs
    return result


def trace_line(c: Conf) -> str:
    """Debug rendering: label, stack depth, store size."""
    return f"label={c.exp.label} depth={len(c.kont)} store={len(c.store)}"
