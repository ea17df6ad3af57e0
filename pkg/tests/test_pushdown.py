import random

from pdcfa import abstract as A
from pdcfa import gc
from pdcfa import pushdown as P
from pdcfa import syntax as S


def prog(text):
    return S.parse_program(text)


def frames3(toy):
    names = ["fa", "fb", "fc"]
    return [A.abs_frame(n, toy.root, A.EMPTY_ENV) for n in names]


def rewrite_normal_forms(seq):
    """Oracle: all normal forms under single-step cancellation rewrites."""
    seq = tuple(seq)
    out = set()
    work = [seq]
    seen = set()
    while work:
        s = work.pop()
        if s in seen:
            continue
        seen.add(s)
        reduced = False
        for i in range(len(s)):
            if isinstance(s[i], P.EpsAction):
                work.append(s[:i] + s[i + 1:])
                reduced = True
            elif (i + 1 < len(s) and isinstance(s[i], P.PushAction)
                  and isinstance(s[i + 1], P.PopAction)
                  and s[i].frame is s[i + 1].frame):
                work.append(s[:i] + s[i + 2:])
                reduced = True
        if not reduced:
            out.add(s)
    return out


class TestNet:
    def test_empty(self):
        assert P.net(()) == ()

    def test_push_pop_cancels(self, toy):
        g = frames3(toy)[0]
        assert P.net((P.push(g), P.pop(g))) == ()

    def test_eps_and_nested_cancellation(self, toy):
        g, f, _ = frames3(toy)
        seq = (P.push(g), P.EPS, P.pop(g), P.push(f))
        assert P.net(seq) == (P.push(f),)

    def test_mismatched_pop_stays(self, toy):
        g, f, _ = frames3(toy)
        seq = (P.push(g), P.pop(f))
        assert P.net(seq) == seq

    def test_matches_exhaustive_rewriting_up_to_len6(self, toy):
        fs = frames3(toy)
        alphabet = [P.EPS] + [P.push(f) for f in fs] + [P.pop(f) for f in fs]
        rng = random.Random(5)
        for n in range(7):
            for _ in range(120):
                seq = tuple(rng.choice(alphabet) for _ in range(n))
                normals = rewrite_normal_forms(seq)
                assert len(normals) == 1, "rewriting is confluent"
                assert P.net(seq) == next(iter(normals))

    def test_idempotent_and_congruent(self, toy):
        fs = frames3(toy)
        alphabet = [P.EPS] + [P.push(f) for f in fs] + [P.pop(f) for f in fs]
        rng = random.Random(6)
        for _ in range(500):
            s1 = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, 10)))
            s2 = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, 10)))
            assert P.net(P.net(s1)) == P.net(s1)
            assert P.net(s1 + s2) == P.net(P.net(s1) + P.net(s2))


class TestStackify:
    def test_empty(self):
        assert P.stackify(()) == ()

    def test_last_push_on_top(self, toy):
        g, f, _ = frames3(toy)
        assert P.stackify((P.push(g), P.push(f))) == (f, g)

    def test_unmatched_pop_undefined(self, toy):
        g = frames3(toy)[0]
        assert P.stackify((P.pop(g),)) is None

    def test_defined_iff_net_pop_free(self, toy):
        fs = frames3(toy)
        alphabet = [P.EPS] + [P.push(f) for f in fs] + [P.pop(f) for f in fs]
        rng = random.Random(7)
        for _ in range(2000):
            seq = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, 10)))
            normal = P.net(seq)
            has_pop = any(isinstance(a, P.PopAction) for a in normal)
            assert (P.stackify(seq) is None) == has_pop


def machine_trace_actions(program, policy, max_steps=60):
    """Follow one abstract path, recording the stack action of each step."""
    conf = A.inject(program.root)
    actions = []
    for _ in range(max_steps):
        succs = A.step(conf, policy)
        if not succs:
            break
        nxt = succs[0]
        if len(nxt.kont) == len(conf.kont) + 1:
            actions.append(P.push(nxt.kont[0]))
        elif len(nxt.kont) + 1 == len(conf.kont):
            actions.append(P.pop(conf.kont[0]))
        else:
            actions.append(P.EPS)
        conf = nxt
    return conf, actions


class TestMachineCorrespondence:
    def test_stack_equals_stackified_action_string(self, bench, toy):
        for program in [toy, *bench.values()]:
            conf, actions = machine_trace_actions(program, A.Mono())
            assert P.stackify(actions) == conf.kont


class TestToRpds:
    def test_let_state_yields_exactly_one_push(self, toy):
        p = prog("(let ((r ((lambda (x) x) 1))) r)")
        oracle = P.to_rpds(p, A.Mono())
        results = oracle.step_top(oracle.root, None)
        kinds = [type(a).__name__ for a, _ in results]
        assert kinds == ["PushAction"]

    def test_return_without_top_frame_is_final(self):
        p = prog("(lambda (x) x)")
        oracle = P.to_rpds(p, A.Mono())
        assert oracle.step_top(oracle.root, None) == []

    def test_reachable_set_matches_explicit_stack_machine(self, identity):
        # stacks are bounded for this program, so the explicit-stack
        # machine is an exhaustive oracle for the pushdown view
        from test_abstract import explore
        from pdcfa.dsg import naive_solve, Bounds
        confs, complete = explore(identity, A.Mono())
        assert complete
        projected = {P.control_state(c.exp, c.env, c.store) for c in confs}
        oracle = P.rpds_as_ipds(P.to_rpds(identity, A.Mono()))
        solved = naive_solve(oracle, Bounds())
        assert solved.outcome == "complete"
        assert set(solved.dsg.nodes) == projected

    def test_pop_offered_only_for_supplied_top(self, toy):
        p = prog("(let ((r ((lambda (x) x) 1))) r)")
        oracle = P.to_rpds(p, A.Mono())
        ((push_act, q1),) = oracle.step_top(oracle.root, None)
        # q1 is the call state; enter the lambda
        ((eps_act, q2),) = oracle.step_top(q1, None)
        assert isinstance(eps_act, P.EpsAction)
        # q2 returns x; without a top frame nothing happens
        assert oracle.step_top(q2, None) == []
        results = oracle.step_top(q2, push_act.frame)
        pops = [(a, q) for a, q in results if isinstance(a, P.PopAction)]
        assert len(pops) == 1
        assert pops[0][0].frame is push_act.frame


class TestToIpds:
    def test_empty_frame_set_at_root_matches_rpds(self, toy):
        rp = P.to_rpds(toy, A.Mono())
        ip = P.to_ipds(toy, A.Mono())
        assert rp.step_top(rp.root, None) == ip.step_intro(ip.root, None, frozenset())

    def test_binding_dead_outside_frame_set_is_dropped(self, toy):
        a_live, a_dead = A.addr_mono("live"), A.addr_mono("dead")
        lam = toy.lams[0]
        store = A.abs_store([
            (a_live, A.vals([A.ABS_NUM])),
            (a_dead, A.vals([A.abs_clo(lam, A.EMPTY_ENV)])),
        ])
        ret = next(e for e in toy.exps if isinstance(e, S.Return))
        env = A.abs_env((v, a_live) for v in S.free_variables(ret))
        q = P.control_state(ret, env, store)
        ip = P.to_ipds(toy, A.Mono())
        frame_live = A.abs_frame("k", toy.root, A.abs_env([("d", a_dead)]))
        frame_other = A.abs_frame("k", toy.root, A.EMPTY_ENV)
        with_dead = ip.step_intro(q, frame_live, frozenset())
        without = ip.step_intro(q, frame_other, frozenset())
        def store_of(results):
            return {qq.store for _, qq in results}
        assert all(a_dead in st.map for st in store_of(with_dead))
        assert all(a_dead not in st.map for st in store_of(without))

    def test_gc_changes_target_not_action_kind(self, bench):
        program = bench["mj09"]
        rp = P.rpds_as_ipds(P.to_rpds(program, A.Mono()))
        ip = P.to_ipds(program, A.Mono())
        from pdcfa.dsg import naive_solve, Bounds
        solved = naive_solve(rp, Bounds())
        lev_frames = {}
        for q in solved.dsg.nodes:
            plain = rp.step_intro(q, None, frozenset())
            collected = ip.step_intro(q, None, frozenset())
            assert {type(a) for a, _ in plain} == {type(a) for a, _ in collected}

    def test_ipds_with_exact_frames_agrees_with_gc_step(self, bench, toy):
        for program in (bench["mj09"], bench["eta"], toy):
            ip = P.to_ipds(program, A.Mono())
            conf = A.inject(program.root)
            for _ in range(40):
                succs = gc.gc_step(conf, A.Mono())
                if not succs:
                    break
                q = P.control_state(conf.exp, conf.env, conf.store)
                fs = frozenset(conf.kont)
                top = conf.kont[0] if conf.kont else None
                results = ip.step_intro(q, top, fs)
                projected = {(P.control_state(s.exp, s.env, s.store)) for s in succs}
                offered = {qq for _, qq in results}
                assert projected == offered
                conf = succs[0]

    def test_deep_context_policies_rejected(self, toy):
        import pytest
        with pytest.raises(ValueError):
            P.to_ipds(toy, A.KCfa(2))
        with pytest.raises(ValueError):
            P.to_rpds(toy, A.KCfa(3))
