"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: ...`` line on success so the
suite doubles as a checklist (run with ``pytest -s tests/test_acceptance.py``).
"""

import random
import time

import pytest

from pdcfa import abstract as A
from pdcfa import analysis as AN
from pdcfa import concrete as C
from pdcfa import corpus
from pdcfa import dsg as D
from pdcfa import gc
from pdcfa import pushdown as P
from pdcfa import syntax as S
from pdcfa.dsg import Bounds
from pdcfa.randgen import random_program

from test_abstract import random_conf
from test_gc import brute_force_reachable, _atoms_of


def _report(line):
    print(line)


EIGHT_POLICIES = [(p, collecting)
                  for p in (A.Mono(), A.OneCfa(), A.PolySplit(), A.KCfa(1))
                  for collecting in (False, True)]


def _oracle(program, policy, collecting):
    if collecting:
        return P.to_ipds(program, policy)
    return P.rpds_as_ipds(P.to_rpds(program, policy))


class TestCriterion1SolverEquivalence:
    def test_corpus_and_random_equality(self, bench):
        t0 = time.monotonic()
        checked = 0
        for name, program in bench.items():
            for policy, collecting in EIGHT_POLICIES:
                bounds = Bounds(max_nodes=400, max_iters=5000)
                n = D.naive_solve(_oracle(program, policy, collecting), bounds)
                s = D.summarize(_oracle(program, policy, collecting), bounds)
                assert n.dsg.nodes == s.dsg.nodes, (name, policy, collecting)
                assert n.dsg.edges == s.dsg.edges, (name, policy, collecting)
                assert n.outcome == s.outcome, (name, policy, collecting)
                checked += 1
        for seed in range(100):
            program = random_program(seed, max_exps=25)
            for collecting in (False, True):
                bounds = Bounds(max_nodes=150, max_iters=2000)
                n = D.naive_solve(_oracle(program, A.Mono(), collecting), bounds)
                s = D.summarize(_oracle(program, A.Mono(), collecting), bounds)
                assert n.dsg.nodes == s.dsg.nodes, (seed, collecting)
                assert n.dsg.edges == s.dsg.edges, (seed, collecting)
                checked += 1
        elapsed = time.monotonic() - t0
        assert elapsed < 600, f"equivalence suite took {elapsed:.0f}s"
        _report(f"criterion 1: summarize == naiveSolve on {checked} instances "
                f"({elapsed:.1f}s) -- PASS")


class TestCriterion2Soundness:
    def test_harness_all_corpus_all_configurations(self, bench):
        bounds = Bounds(max_nodes=50_000)
        inconclusive = []
        for name, program in bench.items():
            for key in AN.GRID_KEYS:
                cfg = AN.grid_config(key, bounds)
                res = AN.soundness_harness(program, cfg, fuel=100_000)
                assert res.counterexample is None, (name, key, res.reason)
                if not res.ok:
                    inconclusive.append((name, key))
        # partial analyses may be inconclusive, never wrong
        for name, key in inconclusive:
            cfg = AN.grid_config(key, bounds)
            rep = AN.run_analysis(corpus.load_benchmark(name), cfg)
            assert rep.outcome == "boundExceeded", (name, key)
        _report(f"criterion 2: soundness harness, 7 programs x 8 configs, "
                f"0 counterexamples, {len(inconclusive)} capped-inconclusive -- PASS")


class TestCriterion3ToyOrdering:
    def test_precision_ordering_and_reference_windows(self, toy):
        states = {}
        for key, target in (("k0-cfa", 653), ("k0-cfa-gc", 105),
                            ("k0-pdcfa", 139), ("k0-pdcfa-gc", 77)):
            rep = AN.run_analysis(toy, AN.grid_config(key))
            assert rep.outcome == "complete"
            states[key] = rep.states
            assert abs(rep.states - target) <= 0.3 * target, \
                f"{key}: {rep.states} vs reference {target}"
        fused = states["k0-pdcfa-gc"]
        assert fused <= min(states["k0-pdcfa"], states["k0-cfa-gc"])
        assert states["k0-pdcfa"] <= states["k0-cfa"]
        assert states["k0-cfa-gc"] <= states["k0-cfa"]
        _report(f"criterion 3: toy ordering {fused} <= "
                f"min({states['k0-pdcfa']}, {states['k0-cfa-gc']}) <= {states['k0-cfa']}, "
                f"all within +/-30% of 77/139/105/653 -- PASS")


class TestCriterion4Singletons:
    TARGETS = {"mj09": 4, "eta": 8, "kcfa2": 4, "kcfa3": 5,
               "blur": 9, "loop2": 4, "sat": 6}

    def test_fused_k0_counts_and_gc_relation(self, bench):
        got = {}
        for name, program in bench.items():
            rows = dict(AN.compare_grid(program, Bounds(max_nodes=50_000)))
            fused = rows["k0-pdcfa-gc"]
            got[name] = fused.singletons
            assert abs(fused.singletons - self.TARGETS[name]) <= 1, \
                f"{name}: {fused.singletons} vs {self.TARGETS[name]}"
            for k in ("k0", "k1"):
                for stack in ("cfa", "pdcfa"):
                    gc_row = rows[f"{k}-{stack}-gc"]
                    plain = rows[f"{k}-{stack}"]
                    assert gc_row.singletons >= plain.singletons, \
                        (name, k, stack)
        _report(f"criterion 4: fused k=0 singletons {got} "
                f"(targets {self.TARGETS}), GC >= no-GC everywhere -- PASS")


class TestCriterion5WorstCase:
    def test_baseline_explodes_fused_completes(self, bench):
        program = bench["kcfa3"]
        base = AN.finite_baseline(program, A.OneCfa(), False,
                                  Bounds(max_nodes=50_000))
        assert base.outcome == "boundExceeded", "baseline should exceed 50k nodes"
        t0 = time.monotonic()
        fused = AN.run_analysis(program, AN.grid_config("k1-pdcfa-gc"))
        elapsed = time.monotonic() - t0
        assert fused.outcome == "complete"
        assert fused.states <= 500
        assert elapsed < 60
        _report(f"criterion 5: kcfa3 k=1 baseline exceeds 50k cap; fused "
                f"completes with {fused.states} states in {elapsed:.2f}s -- PASS")


class TestCriterion6StackAlgebra:
    def test_net_and_stackify_on_10000_random_sequences(self, toy):
        frames = [A.abs_frame(n, toy.root, A.EMPTY_ENV) for n in ("fa", "fb", "fc")]
        alphabet = [P.EPS] + [P.push(f) for f in frames] + [P.pop(f) for f in frames]
        rng = random.Random(2024)
        for i in range(10_000):
            seq = tuple(rng.choice(alphabet) for _ in range(rng.randint(0, 10)))
            normal = P.net(seq)
            assert P.net(normal) == normal, i
            assert not any(isinstance(a, P.EpsAction) for a in normal), i
            for x, y in zip(normal, normal[1:]):
                assert not (isinstance(x, P.PushAction)
                            and isinstance(y, P.PopAction)
                            and x.frame is y.frame), i
            stack = P.stackify(seq)
            has_pop = any(isinstance(a, P.PopAction) for a in normal)
            assert (stack is None) == has_pop, i
            if stack is not None:
                assert stack == tuple(a.frame for a in reversed(normal))
        _report("criterion 6: net/stackify laws on 10000 random sequences -- PASS")


class TestCriterion7GcProperties:
    def test_collect_laws_on_1000_random_configurations(self, toy):
        rng = random.Random(777)
        preserved = 0
        for i in range(1000):
            conf = random_conf(rng, toy)
            assert gc.reachable_addrs(conf) == brute_force_reachable(conf), i
            once = gc.collect(conf)
            assert gc.collect(once) == once, i
            for atom in _atoms_of(conf.exp):
                try:
                    before = A.atomic_eval(atom, conf.env, conf.store)
                except KeyError:
                    continue
                assert A.atomic_eval(atom, once.env, once.store) == before, i
                preserved += 1
        assert preserved > 400
        _report("criterion 7: collect idempotent + eval-preserving on 1000 "
                "random configurations, reachability matches oracle -- PASS")


class TestCriterion8DsgLegality:
    def test_every_node_accepts_a_stack(self, bench):
        checked = 0
        for name, program in bench.items():
            for policy, collecting in EIGHT_POLICIES:
                res = D.summarize(_oracle(program, policy, collecting),
                                  Bounds(max_nodes=2500))
                legal = D.legal_node_set(res.dsg)
                assert legal == res.dsg.nodes, (name, policy, collecting)
                sample = sorted(res.dsg.nodes, key=lambda q: q.skey)[:3]
                for q in sample:
                    assert D.stacks_nfa(res.dsg, q).accepts_anything()
                checked += 1
        _report(f"criterion 8: stacks NFA nonempty for every node, "
                f"{checked} solved instances -- PASS")


class TestCriterion9CrossFlow:
    def test_id_g_result_flows_only_g(self, toy):
        rep = AN.run_analysis(toy, AN.grid_config("k0-pdcfa-gc"))

        def result_binder(arg):
            for e in toy.exps:
                if isinstance(e, S.Let) and isinstance(e.rhs.operator, S.Var) \
                        and e.rhs.operator.name == "id" \
                        and len(e.rhs.operands) == 1 \
                        and isinstance(e.rhs.operands[0], S.Var) \
                        and e.rhs.operands[0].name == arg:
                    return e.binder
            pytest.fail(f"toy must apply id to {arg}")

        tg, tf = result_binder("g"), result_binder("f")
        g_flow, f_flow = rep.flow_of("g"), rep.flow_of("f")
        for temp, own, other in ((tg, g_flow, f_flow), (tf, f_flow, g_flow)):
            flow = rep.flow_of(temp)
            assert len(flow) == 1, "cross flow not recovered"
            assert flow <= own
            assert flow.isdisjoint(other), "the other function leaked through id"
        _report(f"criterion 9: (id g) result flows the singleton "
                f"{sorted(rep.flow_of(tg))}, disjoint from f's lambdas -- PASS")
