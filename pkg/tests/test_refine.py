import pytest
from helpers import equivalence, make_pool, run_pair, session_for, spec, synth

from commsynth.lift import bind, lift
from commsynth.predicates import PredicatePool
from commsynth.refine import Condition, Region, encoders, simplify, validate_outcome
from commsynth.smt import SolverSession

PAIRS = [("counter", "increment", "zero"), ("set", "add", "contains"), ("set", "contains", "remove"),
         ("hashtable", "haskey", "remove"), ("stack", "push", "push"), ("stack", "pop", "pop")]


def _walk(node, path=()):
    yield node, path
    for child in node.children:
        yield from _walk(child, path + (node.chosen[0],))


@pytest.mark.parametrize("heuristic", ["simple", "poke"])
@pytest.mark.parametrize("name,a,b", PAIRS)
def test_tree_invariants(name, a, b, heuristic):
    r = synth(name, a, b, "commute", heuristic)
    out = r.outcome
    assert out.complete
    leaves = 0
    for node, path in _walk(out.tree):
        # no atom is chosen twice on one path
        assert len(set(path)) == len(path)
        if node.children:
            atom = node.chosen[0]
            assert [c.region for c in node.children] == [node.region.extend(atom, True),
                                                         node.region.extend(atom, False)]
            assert node.leaf is None
        else:
            assert node.leaf is not None
            leaves += 1
    assert leaves == len(out.leaves) == len(out.phi.disjuncts) + len(out.phi_hat.disjuncts)
    assert out.stats.max_depth <= len(r.pool)


def test_query_accounting(tmp_path):
    sp = spec("set")
    from commsynth.spec import rename_apart
    from commsynth.predicates import filter_trivial, pgen
    from commsynth.refine import refine

    m, n, _ = rename_apart(sp.method("add"), sp.method("contains"))
    with SolverSession(sp.preamble, log_dir=tmp_path, label="acct") as s:
        pool = filter_trivial(pgen(sp, m, n), s, lambda t: bind(sp, t, "0"))
        before = len(list(tmp_path.glob("*.smt2")))
        out = refine(lift(sp), m, n, pool, "poke", session=s)
        after = len(list(tmp_path.glob("*.smt2")))
    assert out.stats.query_count == after - before > 0


@pytest.mark.parametrize("name,a,b", [("counter", "reset", "zero"), ("set", "add", "getsize"),
                                      ("stack", "push", "push"), ("set", "add", "remove")])
def test_dropping_a_literal_breaks_soundness(name, a, b):
    r = synth(name, a, b)
    s = session_for(r.spec)
    pos, neg = encoders("commute")
    for cond, enc in ((r.outcome.phi, pos), (r.outcome.phi_hat, neg)):
        for i, region in enumerate(cond.disjuncts):
            for j in range(len(region.literals)):
                weaker = Region(region.literals[:j] + region.literals[j + 1:])
                mutated = Condition(cond.disjuncts[:i] + [weaker] + cond.disjuncts[i + 1:], cond.kind)
                hyp, concl = enc(lift(r.spec), r.m, r.n, mutated.to_term())
                assert s.check_valid(hyp, concl).invalid, (cond.kind, weaker)
    s.release()


@pytest.mark.parametrize("budget", [0, 1, 3, 7])
def test_budget_stops_soundly(budget):
    r = run_pair(spec("set"), "add", "contains", budget=budget)
    out = r.outcome
    assert out.interrupted and not out.complete
    assert out.stats.query_count <= budget
    assert any(l.kind == "budget" for l in out.leaves)
    v = validate_outcome(lift(r.spec), r.m, r.n, out)
    assert v.phi_sound == "pass" and v.phi_hat_sound == "pass"


def test_should_stop_and_keyboard_interrupt():
    calls = []

    def stop(q):
        calls.append(q)
        return q >= 4

    r = run_pair(spec("hashtable"), "put", "put", should_stop=stop)
    assert r.outcome.interrupted and r.outcome.stats.query_count == 4

    def boom(q):
        if q >= 5:
            raise KeyboardInterrupt
        return False

    r = run_pair(spec("hashtable"), "put", "put", should_stop=boom)
    assert r.outcome.interrupted and not r.outcome.complete
    v = validate_outcome(lift(r.spec), r.m, r.n, r.outcome)
    assert v.ok


def test_depth_limit():
    sp = spec("set")
    from commsynth.refine import refine
    from commsynth.spec import rename_apart

    m, n, _ = rename_apart(sp.method("add"), sp.method("contains"))
    s = session_for(sp)
    out = refine(lift(sp), m, n, make_pool(sp, m, n), session=s, max_depth=0)
    assert [l.kind for l in out.leaves] == ["budget"] and out.leaves[0].detail == "depth limit"
    assert not out.complete and not out.interrupted


def test_vocabulary_exhaustion():
    sp = spec("set")
    from commsynth.refine import refine
    from commsynth.spec import rename_apart

    m, n, _ = rename_apart(sp.method("add"), sp.method("contains"))
    out = refine(lift(sp), m, n, PredicatePool([]), session=session_for(sp))
    assert [l.kind for l in out.leaves] == ["exhausted"]
    assert len(out.leaves[0].counterexamples) == 2
    assert not out.complete


def test_bad_heuristic():
    with pytest.raises(ValueError):
        run_pair(spec("counter"), "reset", "zero", heuristic="greedy")


@pytest.mark.parametrize("name,a,b", [("hashtable", "put", "put"), ("set", "remove", "remove"),
                                      ("blockking_fixed", "enter", "enter")])
def test_simplify_preserves_meaning(name, a, b):
    r = synth(name, a, b)
    s = session_for(r.spec)
    simp = simplify(r.outcome, s, lambda t: bind(r.spec, t, "0"))
    assert equivalence(r.spec, simp.phi.to_term(), r.outcome.phi.to_term()) == "pass"
    assert equivalence(r.spec, simp.phi_hat.to_term(), r.outcome.phi_hat.to_term()) == "pass"
    size = lambda c: sum(len(d.literals) for d in c.disjuncts)
    assert size(simp.phi) <= size(r.outcome.phi)


def test_left_mover_is_swapped_right_mover():
    left = synth("counter", "decrement", "increment", "lmover").outcome.phi.to_term()
    right = synth("counter", "increment", "decrement", "rmover").outcome.phi.to_term()
    assert equivalence(spec("counter"), left, right) == "pass"


def test_validation_detects_wrong_condition():
    r = synth("set", "add", "getsize")
    bogus = r.outcome
    broken = type(bogus)(bogus.phi_hat, bogus.phi, True, bogus.stats, kind="commute")
    v = validate_outcome(lift(r.spec), r.m, r.n, broken)
    assert v.phi_sound == "fail" and v.phi_hat_sound == "fail" and not v.ok
