"""Seeded random program generators for differential testing.

``random_program`` produces arbitrary closed ANF programs (used to
cross-check the two graph solvers); ``random_typed_term`` produces
simply-typed surface terms with no recursion, so they always terminate
and can be compared value-for-value against an independent evaluator.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .syntax import (
    Pos, Program, SApp, SIf, SLam, SLet, SLit, SVar, SurfaceTerm, a_normalize,
)

_POS = Pos(0, 0)


def _var(name: str) -> SVar:
    return SVar(_POS, name)


# ---------------------------------------------------------------------------
# Untyped closed programs
# ---------------------------------------------------------------------------

def random_program(seed: int, max_exps: int = 25) -> Program:
    """A small closed program; retries until the ANF fits the size cap."""
    rng = random.Random(seed)
    for attempt in range(64):
        term = _gen_term(rng, depth=0, scope=(), budget=rng.randint(3, 9))
        prog = a_normalize(term)
        if prog.label_count <= max_exps:
            return prog
    return a_normalize(_gen_term(rng, 0, (), 2))


def _gen_term(rng: random.Random, depth: int, scope: tuple, budget: int) -> SurfaceTerm:
    atoms = ["lit", "lam"]
    if scope:
        atoms.append("var")
    if budget <= 0 or depth > 4:
        kind = rng.choice(atoms)
    else:
        kind = rng.choice(atoms + ["app", "let", "if", "prim"])
    if kind == "lit":
        return SLit(_POS, rng.choice([0, 1, 2, True, False]))
    if kind == "var":
        return _var(rng.choice(scope))
    if kind == "lam":
        v = f"x{len(scope)}"
        body = _gen_term(rng, depth + 1, scope + (v,), budget - 1)
        return SLam(_POS, (v,), body)
    if kind == "app":
        if scope and rng.random() < 0.5:
            f = _var(rng.choice(scope))
        else:
            v = f"x{len(scope)}"
            f = SLam(_POS, (v,),
                     _gen_term(rng, depth + 1, scope + (v,), budget // 2))
        a = _gen_term(rng, depth + 1, scope, budget // 2)
        return SApp(_POS, f, (a,))
    if kind == "let":
        v = f"x{len(scope)}"
        rhs = _gen_term(rng, depth + 1, scope, budget // 2)
        body = _gen_term(rng, depth + 1, scope + (v,), budget // 2)
        return SLet(_POS, ((v, rhs),), body)
    if kind == "if":
        c = _gen_term(rng, depth + 1, scope, 1)
        t = _gen_term(rng, depth + 1, scope, budget // 2)
        e = _gen_term(rng, depth + 1, scope, budget // 2)
        return SIf(_POS, c, t, e)
    op = rng.choice(["+", "-", "*", "<="])
    a = _gen_term(rng, depth + 1, scope, 1)
    b = _gen_term(rng, depth + 1, scope, 1)
    return SApp(_POS, _var(op), (a, b))


# ---------------------------------------------------------------------------
# Typed terminating terms
# ---------------------------------------------------------------------------

INT = "int"
BOOL = "bool"


@dataclass(frozen=True)
class Fun:
    args: tuple
    ret: object


def random_typed_term(seed: int) -> SurfaceTerm:
    """A closed, simply-typed term of base type; always terminates."""
    rng = random.Random(seed)
    ty = rng.choice([INT, BOOL])
    return _gen_typed(rng, ty, (), depth=0)


def _gen_typed(rng: random.Random, ty, scope: tuple, depth: int) -> SurfaceTerm:
    """scope: tuple of (name, type)."""
    candidates = [n for n, t in scope if t == ty]
    if depth > 4:
        if candidates and rng.random() < 0.7:
            return _var(rng.choice(candidates))
        return _base_value(rng, ty, scope, depth)

    choice = rng.random()
    if choice < 0.25 and candidates:
        return _var(rng.choice(candidates))
    if choice < 0.45:
        return _base_value(rng, ty, scope, depth)
    if choice < 0.60:
        # let binding of a random type
        bty = _random_type(rng, depth)
        v = f"v{len(scope)}"
        rhs = _gen_typed(rng, bty, scope, depth + 1)
        body = _gen_typed(rng, ty, scope + ((v, bty),), depth + 1)
        return SLet(_POS, ((v, rhs),), body)
    if choice < 0.75:
        c = _gen_typed(rng, BOOL, scope, depth + 1)
        t = _gen_typed(rng, ty, scope, depth + 1)
        e = _gen_typed(rng, ty, scope, depth + 1)
        return SIf(_POS, c, t, e)
    if choice < 0.9:
        # apply a lambda built on the spot (no recursion, always terminates)
        aty = _random_type(rng, depth + 2)
        v = f"a{len(scope)}"
        body = _gen_typed(rng, ty, scope + ((v, aty),), depth + 1)
        arg = _gen_typed(rng, aty, scope, depth + 1)
        return SApp(_POS, SLam(_POS, (v,), body), (arg,))
    # call a function-typed variable if one exists, else fall back
    funs = [(n, t) for n, t in scope
            if isinstance(t, Fun) and t.ret == ty and depth < 4]
    if funs:
        n, t = rng.choice(funs)
        args = tuple(_gen_typed(rng, a, scope, depth + 1) for a in t.args)
        return SApp(_POS, _var(n), args)
    if ty in (INT, BOOL):
        return _prim_value(rng, ty, scope, depth)
    return _base_value(rng, ty, scope, depth)


def _random_type(rng: random.Random, depth: int):
    r = rng.random()
    if r < 0.45 or depth > 3:
        return rng.choice([INT, BOOL])
    return Fun((rng.choice([INT, BOOL]),), rng.choice([INT, BOOL]))


def _base_value(rng: random.Random, ty, scope, depth) -> SurfaceTerm:
    if ty == INT:
        return SLit(_POS, rng.randint(-3, 9))
    if ty == BOOL:
        return SLit(_POS, rng.random() < 0.5)
    assert isinstance(ty, Fun)
    vs = tuple(f"p{len(scope)}_{i}" for i in range(len(ty.args)))
    inner = scope + tuple(zip(vs, ty.args))
    return SLam(_POS, vs, _gen_typed(rng, ty.ret, inner, depth + 1))


def _prim_value(rng: random.Random, ty, scope, depth) -> SurfaceTerm:
    a = _gen_typed(rng, INT, scope, depth + 1)
    b = _gen_typed(rng, INT, scope, depth + 1)
    if ty == INT:
        op = rng.choice(["+", "-", "*"])
    else:
        op = rng.choice(["<=", "="])
    return SApp(_POS, _var(op), (a, b))
