"""Shared fixtures for the test suite: cached synthesis runs and equivalence checks."""

from __future__ import annotations

import atexit
import functools
import itertools
from dataclasses import dataclass

from commsynth import terms as T
from commsynth.lift import bind, lift
from commsynth.predicates import PredicatePool, filter_trivial, pgen
from commsynth.refine import RefineOutcome, refine
from commsynth.smt import SolverSession
from commsynth.spec import AdtSpec, MethodSpec, corpus_names, load_spec, parse_spec, rename_apart

MOVER_KINDS = ("rmover", "lmover")


@functools.lru_cache(maxsize=None)
def spec(name: str) -> AdtSpec:
    return load_spec(name)


@functools.lru_cache(maxsize=None)
def lifted(name: str):
    return lift(spec(name))


_sessions = {}


def session_for(sp: AdtSpec) -> SolverSession:
    """One long-lived solver per preamble, shared by the helpers."""
    key = sp.preamble
    if key not in _sessions:
        _sessions[key] = SolverSession(sp.preamble, label="tests")
    return _sessions[key]


@atexit.register
def _close_sessions():
    for s in _sessions.values():
        s.close()
    _sessions.clear()


@dataclass
class Synth:
    spec: AdtSpec
    m: MethodSpec
    n: MethodSpec
    pool: PredicatePool
    outcome: RefineOutcome
    kind: str

    @property
    def lifted(self):
        return lift(self.spec)

    def parse(self, text: str) -> T.Term:
        return parse_condition(self.spec, self.m, self.n, text)


def make_pool(sp: AdtSpec, m: MethodSpec, n: MethodSpec, session=None) -> PredicatePool:
    s = session or session_for(sp)
    return filter_trivial(pgen(sp, m, n), s, lambda t: bind(sp, t, "0"))


def run_pair(sp: AdtSpec, a: str, b: str, kind="commute", heuristic="poke", budget=None, should_stop=None,
             session=None) -> Synth:
    m, n, _ = rename_apart(sp.method(a), sp.method(b))
    s = session or session_for(sp)
    pool = make_pool(sp, m, n, s)
    out = refine(lift(sp), m, n, pool, heuristic, budget, session=s, kind=kind, should_stop=should_stop)
    return Synth(sp, m, n, pool, out, kind)


@functools.lru_cache(maxsize=None)
def synth(name: str, a: str, b: str, kind="commute", heuristic="poke") -> Synth:
    """Cached full run of one pair of a corpus spec."""
    return run_pair(spec(name), a, b, kind, heuristic)


def parse_condition(sp: AdtSpec, m: MethodSpec, n: MethodSpec, text: str) -> T.Term:
    env = dict(sp.state)
    env.update(m.args)
    env.update(n.args)
    return T.parse_term(text, env, sp.signature)


def equivalence(sp: AdtSpec, a: T.Term, b: T.Term) -> str:
    """'pass' when the solver proves a <=> b, else the failing status."""
    s = session_for(sp)
    res = s.check_valid(T.TRUE, T.mk_eq(bind(sp, a, "0"), bind(sp, b, "0")))
    s.release()
    if res.valid:
        return "pass"
    return "fail: " + str(res.model) if res.invalid else res.status


def corpus_pairs(name: str, kind="commute"):
    names = [m.name for m in spec(name).methods]
    if kind == "commute":
        return list(itertools.combinations_with_replacement(names, 2))
    return list(itertools.product(names, repeat=2))


def all_corpus_pairs(kind="commute"):
    return [(name, a, b) for name in corpus_names() for a, b in corpus_pairs(name, kind)]


# -- finite-domain variants for the brute-force oracle ---------------------------------------

E_VALUES = ("e0", "e1")
F_VALUES = ("f0", "f1")
_ENUM_E = "(declare-datatypes ((E 0)) (((e0) (e1))))"
_ENUM_F = "(declare-datatypes ((F 0)) (((f0) (f1))))"


@functools.lru_cache(maxsize=None)
def finite_variant(name: str) -> AdtSpec:
    """The corpus spec with its element sorts replaced by two-valued enumerations."""
    from commsynth.spec import corpus_text

    text = corpus_text(name).replace("(declare-sort E 0)", _ENUM_E).replace("(declare-sort F 0)", _ENUM_F)
    return parse_spec(text)
