import pytest

from pdcfa import concrete as C
from pdcfa import syntax as S
from pdcfa.randgen import random_program

ID_APP = "((lambda (x) x) (lambda (y) y))"


def prog(text):
    return S.parse_program(text)


class TestInject:
    def test_empty_components(self, toy):
        c = C.inject(toy.root)
        assert c.env == {} and c.store == {} and c.kont == ()

    def test_kont_length_zero(self):
        c = C.inject(prog(ID_APP).root)
        assert len(c.kont) == 0

    def test_final_return_has_no_successor(self):
        p = prog("(lambda (x) x)")
        c = C.inject(p.root)
        assert isinstance(c.exp, S.Return)
        assert C.step(c) is None


class TestAtomicEval:
    def test_closure_creation(self):
        p = prog(ID_APP)
        lam = p.root.call.operator
        v = C.atomic_eval(lam, {}, {})
        assert isinstance(v, C.Clo) and v.lam is lam and v.env == {}

    def test_variable_lookup(self):
        v = C.atomic_eval(S.Var("x"), {"x": 3}, {3: C.Num(7)})
        assert v == C.Num(7)

    def test_unbound_variable(self):
        with pytest.raises(C.StuckError):
            C.atomic_eval(S.Var("x"), {}, {})

    def test_literals_and_prims(self):
        assert C.atomic_eval(S.Lit(4), {}, {}) == C.Num(4)
        assert C.atomic_eval(S.Lit(True), {}, {}) == C.Bool(True)
        assert C.atomic_eval(S.PrimRef("+"), {}, {}) == C.PrimVal("+")


class TestStep:
    def test_identity_application_hand_checked(self):
        p = prog(ID_APP)
        c0 = C.inject(p.root)
        c1 = C.step(c0)
        assert isinstance(c1.exp, S.Return)
        assert c1.exp.atom.name == "x"
        assert c1.env == {"x": 0}          # alloc picks 0 on the empty store
        assert isinstance(c1.store[0], C.Clo)
        assert c1.store[0].lam.formals == ("y",)
        assert c1.kont == ()

    def test_let_pushes_frame(self):
        p = prog("(let ((r ((lambda (x) x) 1))) r)")
        c0 = C.inject(p.root)
        c1 = C.step(c0)
        assert len(c1.kont) == 1
        frame = c1.kont[0]
        assert frame.binder == "r"
        assert frame.body is p.root.body

    def test_return_pops_and_binds_fresh(self):
        p = prog("(let ((r ((lambda (x) x) 1))) r)")
        c = C.inject(p.root)
        seen_depths = []
        while True:
            seen_depths.append(len(c.kont))
            nxt = C.step(c)
            if nxt is None:
                break
            # popping extends the store at a fresh address
            assert set(c.store) <= set(nxt.store)
            c = nxt
        assert max(seen_depths) == 1 and len(c.kont) == 0

    def test_nonboolean_condition_sticks(self):
        p = prog("(if 1 2 3)")
        with pytest.raises(C.StuckError):
            C.step(C.inject(p.root))

    def test_arity_mismatch_sticks(self):
        p = prog("((lambda (x y) x) 1)")
        with pytest.raises(C.StuckError):
            C.step(C.inject(p.root))

    def test_apply_non_procedure_sticks(self):
        p = prog("(let ((b ((lambda (u) u) 1))) (b 2))")
        r = C.run(p.root, 100)
        assert r.outcome == "stuck"
        assert "non-procedure" in r.reason


class TestAlloc:
    def test_empty_store_gives_zero(self):
        c = C.Conf(prog(ID_APP).root, {}, {}, ())
        assert C.alloc("v", c) == 0

    def test_dense_store(self):
        c = C.Conf(prog(ID_APP).root, {}, {0: C.Num(1), 1: C.Num(2), 2: C.Num(3)}, ())
        assert C.alloc("v", c) == 3

    def test_always_fresh(self):
        for seed in range(20):
            p = random_program(seed)
            r = C.run(p.root, 300)
            for a, b in zip(r.trace, r.trace[1:]):
                new = set(b.store) - set(a.store)
                assert all(x not in a.store for x in new)


class TestRun:
    def test_identity_application(self):
        r = C.run(prog(ID_APP).root, 100)
        assert r.outcome == "final"
        assert isinstance(r.value, C.Clo)
        assert r.value.lam.formals == ("y",)
        assert len(r.trace) == 2  # inject plus the single transition

    def test_toy_prints_36(self, toy):
        r = C.run(toy.root, 100_000)
        assert r.outcome == "final"
        assert r.value == C.Num(36)
        assert r.outputs == [C.Num(36)]

    def test_omega_exhausts_fuel(self):
        p = prog("((lambda (x) (x x)) (lambda (x) (x x)))")
        r = C.run(p.root, 60)
        assert r.outcome == "fuelExhausted"
        assert len(r.trace) == 61

    def test_trace_line_format(self, toy):
        c = C.inject(toy.root)
        line = C.trace_line(c)
        assert "label=" in line and "depth=0" in line and "store=0" in line


class TestInvariants:
    def test_determinism_store_monotone_stack_discipline(self, bench, toy):
        programs = list(bench.values()) + [toy]
        for p in programs:
            r = C.run(p.root, 100_000)
            assert r.outcome in ("final", "fuelExhausted")
            for a, b in zip(r.trace, r.trace[1:]):
                assert set(a.store) <= set(b.store)
                assert abs(len(b.kont) - len(a.kont)) <= 1
            # determinism: re-running gives the same trace shape
            r2 = C.run(p.root, 100_000)
            assert [c.exp.label for c in r.trace] == [c.exp.label for c in r2.trace]

    def test_alloc_log_covers_store(self, toy):
        r = C.run(toy.root, 100_000)
        final = r.trace[-1]
        assert set(final.store) <= set(r.alloc_log)
