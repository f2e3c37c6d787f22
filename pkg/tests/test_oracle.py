import functools

import pytest
from helpers import finite_variant, run_pair
from oracle import BOUNDED_COUNTER, compare, commutes

from commsynth.spec import parse_spec


@functools.lru_cache(maxsize=None)
def variant(name):
    return parse_spec(BOUNDED_COUNTER) if name == "counter_bounded" else finite_variant(name)


def _pairs(name, kind="commute"):
    names = [m.name for m in variant(name).methods]
    if kind == "commute":
        return [(name, a, b) for i, a in enumerate(names) for b in names[i:]]
    return [(name, a, b) for a in names for b in names]


CASES = _pairs("counter_bounded") + _pairs("set") + _pairs("hashtable")


def test_oracle_sanity():
    s = (frozenset(), 0)
    assert commutes("set", "add", "add", s, ("e0",), ("e1",)) == (True, False)
    assert commutes("set", "add", "contains", s, ("e0",), ("e0",)) == (False, False)
    assert commutes("counter_bounded", "increment", "decrement", (2,), (), ()) == (True, False)
    assert commutes("counter_bounded", "increment", "decrement", (0,), (), ()) == (False, False)
    assert commutes("counter_bounded", "decrement", "reset", (0,), (), ()) == (True, True)


@pytest.mark.parametrize("heuristic", ["poke", "simple"])
@pytest.mark.parametrize("name,a,b", CASES)
def test_commute_matches_enumeration(name, a, b, heuristic):
    sp = variant(name)
    r = run_pair(sp, a, b, heuristic=heuristic)
    assert r.outcome.complete
    cmp = compare(sp, name, r)
    assert cmp.points > 0
    assert not cmp.disagreements, cmp.disagreements[:5]
    assert cmp.covered_phi + cmp.covered_phi_hat == cmp.points


@pytest.mark.parametrize("kind", ["rmover", "lmover"])
@pytest.mark.parametrize("name,a,b", _pairs("counter_bounded", "rmover") +
                         [("hashtable", "put", "get"), ("hashtable", "get", "put"), ("hashtable", "get", "remove"),
                          ("set", "add", "remove")])
def test_movers_match_enumeration(name, a, b, kind):
    sp = variant(name)
    r = run_pair(sp, a, b, kind=kind)
    assert r.outcome.complete
    assert not compare(sp, name, r, kind).disagreements
