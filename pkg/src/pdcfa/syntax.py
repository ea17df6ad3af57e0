"""Surface language frontend and A-normal form core syntax.

The surface language is a small pure Scheme subset written as
s-expressions: ``lambda``, ``let`` (sequential), ``letrec``, ``if``,
``cond``, ``and``/``or``/``not``, top-level ``define``, integer and
boolean literals, and the primitives ``+ - * <= = print``.

``a_normalize`` lowers a surface term into A-normal form: every call
operator and operand is atomic, evaluation order is explicit through
``Let``, and every expression node carries a label that is unique and
dense within its program.  Recursive ``letrec``/``define`` bindings are
eliminated with a self-application encoding (the bound function value is
``(gen gen)`` for a generator lambda ``gen``), so the core language needs
no mutation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

PRIM_OPS = ("+", "-", "*", "<=", "=", "print")

RESERVED = {
    "lambda", "let", "let*", "letrec", "if", "cond", "else", "and", "or",
    "not", "define", "begin",
}


class SourceError(Exception):
    """Lexical, parse, or scoping error with a source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = f" at {line}:{col}" if line is not None else ""
        super().__init__(f"{message}{where}")


# ---------------------------------------------------------------------------
# Surface syntax
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pos:
    line: int
    col: int


@dataclass(frozen=True)
class SurfaceTerm:
    pos: Pos | None


@dataclass(frozen=True)
class SVar(SurfaceTerm):
    name: str


@dataclass(frozen=True)
class SLit(SurfaceTerm):
    value: object  # int or bool


@dataclass(frozen=True)
class SLam(SurfaceTerm):
    formals: tuple[str, ...]
    body: SurfaceTerm
    let_bound: bool = False


@dataclass(frozen=True)
class SApp(SurfaceTerm):
    operator: SurfaceTerm
    operands: tuple[SurfaceTerm, ...]


@dataclass(frozen=True)
class SLet(SurfaceTerm):
    bindings: tuple[tuple[str, SurfaceTerm], ...]  # sequential (let*) scoping
    body: SurfaceTerm


@dataclass(frozen=True)
class SLetrec(SurfaceTerm):
    bindings: tuple[tuple[str, SurfaceTerm], ...]
    body: SurfaceTerm


@dataclass(frozen=True)
class SIf(SurfaceTerm):
    cond: SurfaceTerm
    then: SurfaceTerm
    orelse: SurfaceTerm


@dataclass(frozen=True)
class SBegin(SurfaceTerm):
    forms: tuple[SurfaceTerm, ...]


# ---------------------------------------------------------------------------
# Reader
# ---------------------------------------------------------------------------

class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text: str) -> list[_Token]:
    toks = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            col += 1
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()[]":
            kind = "(" if c in "([" else ")"
            toks.append(_Token(kind, c, line, col))
            col += 1
            i += 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n()[];":
                j += 1
            word = text[i:j]
            toks.append(_Token("atom", word, line, col))
            col += j - i
            i = j
    return toks


def _read_all(toks: list[_Token]):
    """Token stream to nested lists of (_Token | list)."""
    out = []
    stack = [out]
    opens = []
    for t in toks:
        if t.kind == "(":
            lst = []
            stack[-1].append((lst, t))
            stack.append(lst)
            opens.append(t)
        elif t.kind == ")":
            if len(stack) == 1:
                raise SourceError("unbalanced parenthesis", t.line, t.col)
            stack.pop()
            opens.pop()
        else:
            stack[-1].append(t)
    if len(stack) != 1:
        t = opens[-1]
        raise SourceError("unbalanced parenthesis", t.line, t.col)
    return out


_INT_CHARS = set("0123456789")


def _atom_term(tok: _Token) -> SurfaceTerm:
    w = tok.text
    pos = Pos(tok.line, tok.col)
    if w == "#t":
        return SLit(pos, True)
    if w == "#f":
        return SLit(pos, False)
    body = w[1:] if w[0] in "+-" and len(w) > 1 else w
    if body and set(body) <= _INT_CHARS:
        return SLit(pos, int(w))
    return SVar(pos, w)


def _pos_of(form) -> Pos:
    if isinstance(form, tuple):
        return Pos(form[1].line, form[1].col)
    return Pos(form.line, form.col)


def _expect_name(form) -> str:
    if isinstance(form, _Token) and form.kind == "atom":
        t = _atom_term(form)
        if isinstance(t, SVar):
            if t.name in RESERVED:
                raise SourceError(f"reserved word {t.name!r} used as a name",
                                  form.line, form.col)
            return t.name
    p = _pos_of(form)
    raise SourceError("expected an identifier", p.line, p.col)


def _build(form) -> SurfaceTerm:
    if isinstance(form, _Token):
        return _atom_term(form)
    items, open_tok = form
    pos = Pos(open_tok.line, open_tok.col)
    if not items:
        raise SourceError("empty application", pos.line, pos.col)
    head = items[0]
    if isinstance(head, _Token) and head.kind == "atom":
        word = head.text
        if word == "lambda":
            if len(items) < 3:
                raise SourceError("lambda needs a formals list and a body",
                                  pos.line, pos.col)
            formals_form = items[1]
            if not isinstance(formals_form, tuple):
                raise SourceError("lambda formals must be a list", pos.line, pos.col)
            formals = tuple(_expect_name(f) for f in formals_form[0])
            if len(set(formals)) != len(formals):
                raise SourceError("duplicate lambda formal", pos.line, pos.col)
            body = _body_sequence(items[2:], pos)
            return SLam(pos, formals, body)
        if word in ("let", "let*", "letrec"):
            if len(items) < 3:
                raise SourceError(f"{word} needs bindings and a body", pos.line, pos.col)
            binds_form = items[1]
            if not isinstance(binds_form, tuple):
                raise SourceError(f"{word} bindings must be a list", pos.line, pos.col)
            bindings = []
            for b in binds_form[0]:
                if not (isinstance(b, tuple) and len(b[0]) == 2):
                    raise SourceError("binding must be (name expr)", pos.line, pos.col)
                name = _expect_name(b[0][0])
                bindings.append((name, _build(b[0][1])))
            body = _body_sequence(items[2:], pos)
            cls = SLetrec if word == "letrec" else SLet
            return cls(pos, tuple(bindings), body)
        if word == "if":
            if len(items) != 4:
                raise SourceError("if needs exactly a test and two branches",
                                  pos.line, pos.col)
            return SIf(pos, _build(items[1]), _build(items[2]), _build(items[3]))
        if word == "cond":
            return _build_cond(items[1:], pos)
        if word == "and":
            return _build_and(items[1:], pos)
        if word == "or":
            return _build_or(items[1:], pos)
        if word == "not":
            if len(items) != 2:
                raise SourceError("not takes one argument", pos.line, pos.col)
            return SIf(pos, _build(items[1]), SLit(pos, False), SLit(pos, True))
        if word == "begin":
            if len(items) == 1:
                raise SourceError("empty begin", pos.line, pos.col)
            return _body_sequence(items[1:], pos)
        if word == "define":
            raise SourceError("define is only allowed at top level", pos.line, pos.col)
    return SApp(pos, _build(head), tuple(_build(a) for a in items[1:]))


def _build_cond(clauses, pos: Pos) -> SurfaceTerm:
    if not clauses:
        raise SourceError("cond needs at least one clause", pos.line, pos.col)
    first = clauses[0]
    if not isinstance(first, tuple) or not first[0]:
        raise SourceError("cond clause must be (test expr...)", pos.line, pos.col)
    parts = first[0]
    test = parts[0]
    body = _body_sequence(parts[1:], pos) if len(parts) > 1 else None
    is_else = isinstance(test, _Token) and test.text == "else"
    if is_else:
        if body is None:
            raise SourceError("else clause needs a body", pos.line, pos.col)
        if len(clauses) > 1:
            raise SourceError("else must be the last cond clause", pos.line, pos.col)
        return body
    if body is None:
        raise SourceError("cond clause must be (test expr...)", pos.line, pos.col)
    if len(clauses) == 1:
        # no else: fall through to #f
        return SIf(pos, _build(test), body, SLit(pos, False))
    return SIf(pos, _build(test), body, _build_cond(clauses[1:], pos))


def _build_and(args, pos: Pos) -> SurfaceTerm:
    if not args:
        return SLit(pos, True)
    if len(args) == 1:
        return _build(args[0])
    return SIf(pos, _build(args[0]), _build_and(args[1:], pos), SLit(pos, False))


def _build_or(args, pos: Pos) -> SurfaceTerm:
    if not args:
        return SLit(pos, False)
    if len(args) == 1:
        return _build(args[0])
    return SIf(pos, _build(args[0]), SLit(pos, True), _build_or(args[1:], pos))


def _body_sequence(forms, pos: Pos) -> SurfaceTerm:
    if not forms:
        raise SourceError("missing body", pos.line, pos.col)
    built = [_build(f) for f in forms]
    if len(built) == 1:
        return built[0]
    return SBegin(pos, tuple(built))


def parse(text: str) -> SurfaceTerm:
    """Parse a program: top-level defines followed by expressions.

    The result is a single surface term; defines become one letrec around
    the remaining top-level forms.
    """
    forms = _read_all(_tokenize(text))
    if not forms:
        raise SourceError("empty program", 1, 1)
    defines: list[tuple[str, SurfaceTerm]] = []
    rest: list = []
    for f in forms:
        if (isinstance(f, tuple) and f[0]
                and isinstance(f[0][0], _Token) and f[0][0].text == "define"):
            items, open_tok = f
            pos = Pos(open_tok.line, open_tok.col)
            if len(items) < 3:
                raise SourceError("define needs a name and a value", pos.line, pos.col)
            target = items[1]
            if isinstance(target, tuple):
                # (define (f x ...) body...)
                if not target[0]:
                    raise SourceError("define needs a function name", pos.line, pos.col)
                name = _expect_name(target[0][0])
                formals = tuple(_expect_name(x) for x in target[0][1:])
                if len(set(formals)) != len(formals):
                    raise SourceError("duplicate formal in define", pos.line, pos.col)
                body = _body_sequence(items[2:], pos)
                defines.append((name, SLam(pos, formals, body)))
            else:
                name = _expect_name(target)
                if len(items) != 3:
                    raise SourceError("define takes a single value", pos.line, pos.col)
                defines.append((name, _build(items[2])))
        else:
            rest.append(f)
    if not rest:
        raise SourceError("program has no expression to evaluate", 1, 1)
    pos0 = _pos_of(rest[0])
    body = _body_sequence(rest, pos0)
    if defines:
        return SLetrec(pos0, tuple(defines), body)
    return body


# ---------------------------------------------------------------------------
# ANF core syntax
# ---------------------------------------------------------------------------

_uid_counter = itertools.count()


class Atom:
    __slots__ = ()


class Exp:
    __slots__ = ()


@dataclass(eq=False)
class Var(Atom):
    name: str


@dataclass(eq=False)
class Lit(Atom):
    value: object  # int or bool


@dataclass(eq=False)
class PrimRef(Atom):
    op: str


@dataclass(eq=False)
class Lam(Atom):
    formals: tuple[str, ...]
    body: Exp
    let_bound: bool = False
    lam_id: int = -1
    uid: int = field(default_factory=lambda: next(_uid_counter))

    def show(self) -> str:
        return f"(lambda ({' '.join(self.formals)}) ...)@{self.lam_id}"


@dataclass(eq=False)
class Call:
    operator: Atom
    operands: tuple[Atom, ...]


@dataclass(eq=False)
class Return(Exp):
    atom: Atom
    label: int = -1
    uid: int = field(default_factory=lambda: next(_uid_counter))


@dataclass(eq=False)
class TailCall(Exp):
    call: Call
    label: int = -1
    uid: int = field(default_factory=lambda: next(_uid_counter))


@dataclass(eq=False)
class Let(Exp):
    binder: str
    rhs: Call
    body: Exp
    # the rhs as a control point of its own; shares the Call node
    rhs_exp: TailCall = None
    label: int = -1
    uid: int = field(default_factory=lambda: next(_uid_counter))

    def __post_init__(self):
        if self.rhs_exp is None:
            self.rhs_exp = TailCall(self.rhs)


@dataclass(eq=False)
class If(Exp):
    cond: Atom
    then: Exp
    orelse: Exp
    label: int = -1
    uid: int = field(default_factory=lambda: next(_uid_counter))


@dataclass(eq=False)
class Program:
    root: Exp
    label_count: int
    lams: tuple[Lam, ...]
    var_names: tuple[str, ...]   # every binder occurring in the program
    exps: tuple[Exp, ...]        # indexed by label

    def lam_by_id(self, lam_id: int) -> Lam:
        return self.lams[lam_id]


def _label_program(root: Exp) -> Program:
    """Post-order labeling; also collects lambdas and binder names."""
    exps: list[Exp] = []
    lams: list[Lam] = []
    names: list[str] = []
    seen_names = set()

    def add_name(v: str):
        if v not in seen_names:
            seen_names.add(v)
            names.append(v)

    def visit_atom(a: Atom):
        if isinstance(a, Lam):
            for v in a.formals:
                add_name(v)
            visit(a.body)
            a.lam_id = len(lams)
            lams.append(a)

    def visit(e: Exp):
        if isinstance(e, Return):
            visit_atom(e.atom)
        elif isinstance(e, TailCall):
            visit_atom(e.call.operator)
            for a in e.call.operands:
                visit_atom(a)
        elif isinstance(e, Let):
            add_name(e.binder)
            visit(e.rhs_exp)
            visit(e.body)
        elif isinstance(e, If):
            visit_atom(e.cond)
            visit(e.then)
            visit(e.orelse)
        else:
            raise TypeError(f"not an Exp: {e!r}")
        e.label = len(exps)
        exps.append(e)

    visit(root)
    return Program(root, len(exps), tuple(lams), tuple(names), tuple(exps))


# ---------------------------------------------------------------------------
# A-normalization
# ---------------------------------------------------------------------------

class _Names:
    def __init__(self):
        self.counter = itertools.count()

    def fresh(self, base: str) -> str:
        return f"{base}%{next(self.counter)}"


def _surface_free(t: SurfaceTerm) -> frozenset[str]:
    if isinstance(t, SVar):
        return frozenset() if t.name in PRIM_OPS else frozenset([t.name])
    if isinstance(t, SLit):
        return frozenset()
    if isinstance(t, SLam):
        return _surface_free(t.body) - frozenset(t.formals)
    if isinstance(t, SApp):
        out = _surface_free(t.operator)
        for a in t.operands:
            out |= _surface_free(a)
        return out
    if isinstance(t, SLet):
        out = _surface_free(t.body)
        for name, rhs in reversed(t.bindings):
            out = (out - {name}) | _surface_free(rhs)
        return out
    if isinstance(t, SLetrec):
        bound = frozenset(n for n, _ in t.bindings)
        out = _surface_free(t.body)
        for _, rhs in t.bindings:
            out |= _surface_free(rhs)
        return out - bound
    if isinstance(t, SIf):
        return _surface_free(t.cond) | _surface_free(t.then) | _surface_free(t.orelse)
    if isinstance(t, SBegin):
        out = frozenset()
        for f in t.forms:
            out |= _surface_free(f)
        return out
    raise TypeError(f"not a surface term: {t!r}")


def _scc_order(names: list[str], refs: dict) -> list[list[str]]:
    """Tarjan; components come out dependencies-first."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on: set[str] = set()
    out: list[list[str]] = []
    counter = itertools.count()

    def visit(v: str):
        index[v] = low[v] = next(counter)
        stack.append(v)
        on.add(v)
        for w in refs[v]:
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(sorted(comp, key=names.index))

    for v in names:
        if v not in index:
            visit(v)
    return out


def _encode_letrec(t: SLetrec, names: _Names) -> SurfaceTerm:
    """Self-application encoding of (letrec ((f lam) ...) body).

    The bindings are split into strongly connected reference groups.
    Non-recursive bindings become plain lets; each recursive group gets
    generators ``f$ = (lambda (f$ g$ ...) wrapped-lam)`` whose wrapped
    lambda rebinds the recursive names it actually uses via
    ``(f$ f$ g$ ...)`` before running the original body.
    """
    for name, rhs in t.bindings:
        if not isinstance(rhs, SLam):
            raise SourceError("letrec bindings must be lambdas", t.pos.line, t.pos.col)
    rec_names = [n for n, _ in t.bindings]
    if len(set(rec_names)) != len(rec_names):
        raise SourceError("duplicate letrec binding", t.pos.line, t.pos.col)
    by_name = dict(t.bindings)
    refs = {n: [m for m in rec_names if m in _surface_free(by_name[n])]
            for n in rec_names}
    groups = _scc_order(rec_names, refs)

    def encode_group(group: list[str], inner: SurfaceTerm) -> SurfaceTerm:
        pos = t.pos
        impl_names = {n: names.fresh(f"{n}~") for n in group}
        impl_vars = tuple(SVar(pos, impl_names[n]) for n in group)

        def wrapper(name: str, tag: str) -> SLam:
            # eta-wrapper for value uses: forwards to the implementation
            ws = tuple(f"{tag}^{i}" for i in range(len(by_name[name].formals)))
            call = SApp(pos, SVar(pos, impl_names[name]),
                        impl_vars + tuple(SVar(pos, w) for w in ws))
            return SLam(pos, ws, call)

        def with_wrappers(u: SurfaceTerm, active: frozenset, tag: str) -> SurfaceTerm:
            out = u
            escaping = [n for n in active if n in _surface_free(u)]
            for n in sorted(escaping, key=group.index, reverse=True):
                out = SLet(pos, ((n, wrapper(n, tag)),), out)
            return out

        def wrap(lam: SLam) -> SLam:
            active = frozenset(group) - frozenset(lam.formals)
            return SLam(pos, tuple(impl_names[n] for n in group) + lam.formals,
                        with_wrappers(lam.body, active, "wi"), let_bound=True)

        impls = [(impl_names[n], wrap(by_name[n])) for n in group]
        return SLet(pos, tuple(impls), with_wrappers(inner, frozenset(group), "wo"))

    term: SurfaceTerm = t.body
    for group in reversed(groups):
        if len(group) == 1 and group[0] not in refs[group[0]]:
            name = group[0]
            if name in _surface_free(term):
                term = SLet(t.pos, ((name, by_name[name]),), term)
        else:
            term = encode_group(group, term)
    return term


def _flatten_test(t: SIf) -> SIf:
    """Push branching through nested boolean tests.

    ``(if (if a X Y) T E)`` becomes ``(if a (if X T E) (if Y T E))`` with
    literal arms simplified away; this is how ``and``/``or`` tests avoid
    materializing join closures.
    """
    while isinstance(t.cond, SIf):
        inner = t.cond

        def arm(branch: SurfaceTerm) -> SurfaceTerm:
            if isinstance(branch, SLit) and branch.value is True:
                return t.then
            if isinstance(branch, SLit) and branch.value is False:
                return t.orelse
            return _flatten_test(SIf(t.pos, branch, t.then, t.orelse))

        t = SIf(t.pos, inner.cond, arm(inner.then), arm(inner.orelse))
    return t


def a_normalize(term: SurfaceTerm) -> Program:
    """Lower a closed surface term into a labeled A-normal-form program."""
    names = _Names()

    def check_scope(t: SurfaceTerm, scope: frozenset[str]):
        free = _surface_free(t) - scope
        if free:
            missing = sorted(free)[0]
            pos = t.pos or Pos(0, 0)
            raise SourceError(f"unbound variable {missing!r}", pos.line, pos.col)

    check_scope(term, frozenset())

    def atom_of(t: SurfaceTerm, scope, k) -> Exp:
        """Normalize t to an Atom and continue with k(atom)."""
        if isinstance(t, SVar):
            if t.name in PRIM_OPS and t.name not in scope:
                return k(PrimRef(t.name))
            return k(Var(t.name))
        if isinstance(t, SLit):
            return k(Lit(t.value))
        if isinstance(t, SLam):
            inner = tail(t.body, scope | frozenset(t.formals))
            return k(Lam(t.formals, inner, let_bound=t.let_bound))
        if isinstance(t, SApp):
            tmp = names.fresh("t")
            return call_of(t, scope, lambda call: Let(tmp, call, k(Var(tmp))))
        if isinstance(t, SIf):
            t = _flatten_test(t)
            # join-point encoding: bind the continuation as a lambda
            jn = names.fresh("j")
            tv = names.fresh("v")
            join = Lam((tv,), k(Var(tv)))
            def branch(b):
                return atom_of(b, scope,
                               lambda a: TailCall(Call(Var(jn), (a,))))
            inner = atom_of(t.cond, scope,
                            lambda c: If(c, branch(t.then), branch(t.orelse)))
            return TailCall(Call(Lam((jn,), inner), (join,)))
        if isinstance(t, SBegin):
            *effects, last = t.forms
            def chain(i):
                if i == len(effects):
                    return atom_of(last, scope, k)
                return effect_of(effects[i], scope, lambda: chain(i + 1))
            return chain(0)
        if isinstance(t, SLetrec):
            return atom_of(_encode_letrec(t, names), scope, k)
        if isinstance(t, SLet):
            def peel(i, sc):
                if i == len(t.bindings):
                    return atom_of(t.body, sc, k)
                name, rhs = t.bindings[i]
                return bind_of(name, rhs, sc, lambda: peel(i + 1, sc | {name}))
            return peel(0, scope)
        raise TypeError(f"not a surface term: {t!r}")

    def effect_of(t: SurfaceTerm, scope, k) -> Exp:
        """Normalize t for effect only, then continue with k()."""
        if isinstance(t, (SVar, SLit, SLam)):
            return k()
        tmp = names.fresh("ig")
        return bind_of(tmp, t, scope, k)

    def bind_of(name: str, rhs: SurfaceTerm, scope, k) -> Exp:
        """Normalize (let ((name rhs)) ...) with k() producing the body."""
        if isinstance(rhs, SApp):
            return call_of(rhs, scope, lambda call: Let(name, call, k()))
        if isinstance(rhs, (SVar, SLit, SLam, SIf, SBegin, SLet, SLetrec)):
            # atom or complex value: immediate application keeps the
            # variable observable by the analyses
            def finish(a: Atom) -> Exp:
                if isinstance(a, Lam):
                    a = Lam(a.formals, a.body, let_bound=True)
                return TailCall(Call(Lam((name,), k()), (a,)))
            return atom_of(rhs, scope, finish)
        raise TypeError(f"not a surface term: {rhs!r}")

    def call_of(t: SApp, scope, k) -> Exp:
        """Normalize an application to a Call and continue with k(call)."""
        def operands(i, acc):
            if i == len(t.operands):
                return k(Call(acc[0], tuple(acc[1:])))
            return atom_of(t.operands[i], scope,
                           lambda a: operands(i + 1, acc + [a]))

        def check_operator(f: Atom) -> Exp:
            if t.operands and isinstance(f, Lit):
                pos = t.pos or Pos(0, 0)
                raise SourceError("literal in operator position",
                                  pos.line, pos.col)
            return operands(0, [f])

        return atom_of(t.operator, scope, check_operator)

    def tail(t: SurfaceTerm, scope) -> Exp:
        if isinstance(t, (SVar, SLit, SLam)):
            return atom_of(t, scope, lambda a: Return(a))
        if isinstance(t, SApp):
            return call_of(t, scope, lambda call: TailCall(call))
        if isinstance(t, SIf):
            t = _flatten_test(t)
            return atom_of(t.cond, scope,
                           lambda c: If(c, tail(t.then, scope), tail(t.orelse, scope)))
        if isinstance(t, SLet):
            def peel(i, sc):
                if i == len(t.bindings):
                    return tail(t.body, sc)
                name, rhs = t.bindings[i]
                return bind_of(name, rhs, sc, lambda: peel(i + 1, sc | {name}))
            return peel(0, scope)
        if isinstance(t, SLetrec):
            return tail(_encode_letrec(t, names), scope)
        if isinstance(t, SBegin):
            *effects, last = t.forms
            def chain(i):
                if i == len(effects):
                    return tail(last, scope)
                return effect_of(effects[i], scope, lambda: chain(i + 1))
            return chain(0)
        raise TypeError(f"not a surface term: {t!r}")

    root = tail(term, frozenset())
    return _label_program(root)


def parse_program(text: str) -> Program:
    return a_normalize(parse(text))


# ---------------------------------------------------------------------------
# Validation and free variables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    label: int
    message: str


def validate_anf(program: Program) -> list[Violation]:
    """Check the ANF grammar; empty result means the program is well formed."""
    out: list[Violation] = []
    seen_labels: dict[int, Exp] = {}

    def atom_ok(a, scope, label):
        if isinstance(a, Var):
            if a.name not in scope:
                out.append(Violation(label, f"unbound variable {a.name!r}"))
        elif isinstance(a, Lam):
            if len(set(a.formals)) != len(a.formals):
                out.append(Violation(label, "duplicate lambda formals"))
            walk(a.body, scope | frozenset(a.formals))
        elif isinstance(a, Lit):
            if not isinstance(a.value, (int, bool)):
                out.append(Violation(label, "literal must be an integer or boolean"))
        elif isinstance(a, PrimRef):
            if a.op not in PRIM_OPS:
                out.append(Violation(label, f"unknown primitive {a.op!r}"))
        else:
            out.append(Violation(label, f"non-atomic operand {type(a).__name__}"))

    def call_ok(c: Call, scope, label):
        if not isinstance(c, Call):
            out.append(Violation(label, "call position does not hold a Call"))
            return
        atom_ok(c.operator, scope, label)
        if c.operands and not isinstance(c.operator, (Lam, Var, PrimRef)):
            out.append(Violation(label, "operands on a non-applicable operator"))
        for a in c.operands:
            atom_ok(a, scope, label)

    def walk(e: Exp, scope):
        if e.label in seen_labels and seen_labels[e.label] is not e:
            out.append(Violation(e.label, "duplicate label"))
        seen_labels[e.label] = e
        if isinstance(e, Return):
            atom_ok(e.atom, scope, e.label)
        elif isinstance(e, TailCall):
            call_ok(e.call, scope, e.label)
        elif isinstance(e, Let):
            if not isinstance(e.rhs_exp, TailCall) or e.rhs_exp.call is not e.rhs:
                out.append(Violation(e.label, "rhs control point does not share the rhs call"))
                call_ok(e.rhs, scope, e.label)
            else:
                walk(e.rhs_exp, scope)
            walk(e.body, scope | {e.binder})
        elif isinstance(e, If):
            atom_ok(e.cond, scope, e.label)
            walk(e.then, scope)
            walk(e.orelse, scope)
        else:
            out.append(Violation(getattr(e, "label", -1), "unknown expression form"))

    walk(program.root, frozenset())
    labels = sorted(seen_labels)
    if labels != list(range(program.label_count)):
        out.append(Violation(-1, "labels are not dense"))
    return out


def free_variables(e: Exp | Atom) -> frozenset[str]:
    """Free variables of an ANF expression or atom (primitives excluded)."""
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, (Lit, PrimRef)):
        return frozenset()
    if isinstance(e, Lam):
        return free_variables(e.body) - frozenset(e.formals)
    if isinstance(e, Call):
        out = free_variables(e.operator)
        for a in e.operands:
            out |= free_variables(a)
        return out
    if isinstance(e, Return):
        return free_variables(e.atom)
    if isinstance(e, TailCall):
        return free_variables(e.call)
    if isinstance(e, Let):
        return free_variables(e.rhs) | (free_variables(e.body) - {e.binder})
    if isinstance(e, If):
        return free_variables(e.cond) | free_variables(e.then) | free_variables(e.orelse)
    raise TypeError(f"not ANF syntax: {e!r}")


# ---------------------------------------------------------------------------
# Printing and alpha-equivalence
# ---------------------------------------------------------------------------

def atom_to_sexpr(a: Atom) -> str:
    if isinstance(a, Var):
        return a.name
    if isinstance(a, Lit):
        if a.value is True:
            return "#t"
        if a.value is False:
            return "#f"
        return str(a.value)
    if isinstance(a, PrimRef):
        return a.op
    if isinstance(a, Lam):
        return f"(lambda ({' '.join(a.formals)}) {to_sexpr(a.body)})"
    raise TypeError(f"not an atom: {a!r}")


def to_sexpr(e: Exp) -> str:
    """Print ANF back as surface syntax; reparsing normalizes to an
    alpha-equivalent program."""
    if isinstance(e, Return):
        return atom_to_sexpr(e.atom)
    if isinstance(e, TailCall):
        op = e.call.operator
        # invert the atom-binding encoding so let_bound marks survive a
        # print/reparse round trip
        if (isinstance(op, Lam) and len(op.formals) == 1
                and len(e.call.operands) == 1
                and isinstance(e.call.operands[0], Lam)
                and e.call.operands[0].let_bound):
            bound = atom_to_sexpr(e.call.operands[0])
            return f"(let (({op.formals[0]} {bound})) {to_sexpr(op.body)})"
        parts = [atom_to_sexpr(op)] + [atom_to_sexpr(a) for a in e.call.operands]
        return f"({' '.join(parts)})"
    if isinstance(e, Let):
        rhs = to_sexpr(e.rhs_exp)
        return f"(let (({e.binder} {rhs})) {to_sexpr(e.body)})"
    if isinstance(e, If):
        return f"(if {atom_to_sexpr(e.cond)} {to_sexpr(e.then)} {to_sexpr(e.orelse)})"
    raise TypeError(f"not an Exp: {e!r}")


def alpha_equal(p1: Program, p2: Program) -> bool:
    """Structural equality modulo binder renaming."""
    counter = itertools.count()

    def atoms(a1, a2, m1, m2) -> bool:
        if type(a1) is not type(a2):
            return False
        if isinstance(a1, Var):
            return m1.get(a1.name, a1.name) == m2.get(a2.name, a2.name)
        if isinstance(a1, Lit):
            return a1.value == a2.value and type(a1.value) is type(a2.value)
        if isinstance(a1, PrimRef):
            return a1.op == a2.op
        if isinstance(a1, Lam):
            # let_bound is surface metadata, not term structure
            if len(a1.formals) != len(a2.formals):
                return False
            n1, n2 = dict(m1), dict(m2)
            for x, y in zip(a1.formals, a2.formals):
                fresh = f"@{next(counter)}"
                n1[x] = fresh
                n2[y] = fresh
            return exps(a1.body, a2.body, n1, n2)
        return False

    def exps(e1, e2, m1, m2) -> bool:
        if type(e1) is not type(e2):
            return False
        if isinstance(e1, Return):
            return atoms(e1.atom, e2.atom, m1, m2)
        if isinstance(e1, TailCall):
            c1, c2 = e1.call, e2.call
            return (len(c1.operands) == len(c2.operands)
                    and atoms(c1.operator, c2.operator, m1, m2)
                    and all(atoms(a, b, m1, m2) for a, b in zip(c1.operands, c2.operands)))
        if isinstance(e1, Let):
            if not exps(e1.rhs_exp, e2.rhs_exp, m1, m2):
                return False
            fresh = f"@{next(counter)}"
            return exps(e1.body, e2.body, {**m1, e1.binder: fresh}, {**m2, e2.binder: fresh})
        if isinstance(e1, If):
            return (atoms(e1.cond, e2.cond, m1, m2)
                    and exps(e1.then, e2.then, m1, m2)
                    and exps(e1.orelse, e2.orelse, m1, m2))
        return False

    return exps(p1.root, p2.root, {}, {})
