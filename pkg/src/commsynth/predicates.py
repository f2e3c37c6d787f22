"""Candidate predicate vocabulary for a method pair."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from . import terms as T
from .errors import SpecError
from .smt import Counterexample, SolverError, SolverSession
from .spec import AdtSpec, MethodSpec, has_placeholder, instantiate_placeholders

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Atom:
    term: T.Term
    origin: tuple = field(default=(), compare=False)
    user_hint: bool = field(default=False, compare=False)

    @property
    def complexity(self) -> int:
        return T.node_count(self.term)

    @property
    def key(self):
        return T.term_key(self.term)

    def __str__(self):
        return T.to_smt(self.term)


@dataclass
class PredicatePool:
    atoms: list
    raw_count: int = 0
    filtered_count: int = 0
    dropped: list = field(default_factory=list)
    # how many generated atoms each normalized atom stands for
    multiplicity: dict = field(default_factory=dict)

    def __post_init__(self):
        self.atoms = sorted(self.atoms, key=lambda a: a.key)

    @classmethod
    def unsorted(cls, atoms, **kw):
        pool = cls([], **kw)
        pool.atoms = list(atoms)
        return pool

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def __contains__(self, atom):
        return atom in self.atoms

    @property
    def user_hints(self):
        return [a for a in self.atoms if a.user_hint]

    def without(self, atom: Atom) -> "PredicatePool":
        return PredicatePool([a for a in self.atoms if a != atom], self.raw_count, self.filtered_count,
                             self.dropped, self.multiplicity)


def _state_only(t: T.Term, spec: AdtSpec) -> bool:
    return set(T.free_vars(t)) <= set(spec.state_names)


def term_universe(spec: AdtSpec, m: MethodSpec, n: MethodSpec) -> dict:
    """Terms by sort from which atoms are built, in a fixed order."""
    universe: dict = {}

    def add(t):
        bucket = universe.setdefault(t.sort, [])
        if t not in bucket:
            bucket.append(t)

    for meth in spec.methods:
        for t in meth.hint_terms():
            if not has_placeholder(t) and _state_only(t, spec):
                add(t)
    for meth in (m, n):
        for t in meth.hint_terms():
            add(instantiate_placeholders(t, meth, meth.arg_names))
    for v, s in spec.state:
        add(T.Var(v, s))
    for meth in (m, n):
        for a, s in meth.args:
            add(T.Var(a, s))
    return {s: sorted(ts, key=T.term_key) for s, ts in universe.items()}


def syntactically_trivial(t: T.Term) -> bool:
    if isinstance(t, T.Const):
        return True
    if isinstance(t, T.App) and t.op in ("=", "<=", ">=") and len(set(t.args)) == 1:
        return True
    if isinstance(t, T.App) and t.op in ("<", ">", "distinct") and len(set(t.args)) == 1:
        return True
    return False


def extra_atoms(spec: AdtSpec, m: MethodSpec, n: MethodSpec) -> list:
    env = dict(spec.state)
    env.update(m.args)
    env.update(n.args)
    out = []
    for text in spec.predicates_extra:
        try:
            t = T.parse_term(text, env, spec.signature)
        except SpecError as exc:
            log.debug("predicates_extra %s does not apply to %s/%s: %s", text, m.name, n.name, exc)
            continue
        if t.sort != T.BOOL:
            log.warning("predicates_extra %s is not boolean; skipped", text)
            continue
        out.append(Atom(t, ("user", text), True))
    return out


def pgen(spec: AdtSpec, m: MethodSpec, n: MethodSpec) -> PredicatePool:
    """Well-sorted atoms over the pair's vocabulary, syntactically filtered.

    ``m`` and ``n`` must already be renamed apart.
    """
    universe = term_universe(spec, m, n)
    raw = 0
    kept = []
    for op, sorts in spec.predicates:
        pools = [universe.get(s, []) for s in sorts]
        for args in itertools.product(*pools):
            raw += 1
            t = T.make_app(op, args, spec.signature)
            if syntactically_trivial(t):
                continue
            kept.append(Atom(t, (op, tuple(T.to_smt(a) for a in args))))
    kept.extend(extra_atoms(spec, m, n))
    return dedup(PredicatePool.unsorted(kept, raw_count=raw, filtered_count=len(kept)))


def dedup(pool: PredicatePool) -> PredicatePool:
    """Keep the first spelling of atoms equal up to symmetric operand order."""
    seen = {}
    count = {}
    for atom in pool.atoms:
        norm = T.normalize(atom.term)
        count[norm] = count.get(norm, 0) + pool.multiplicity.get(atom.term, 1)
        if norm in seen:
            if atom.user_hint and not seen[norm].user_hint:
                seen[norm] = Atom(seen[norm].term, seen[norm].origin, True)
            continue
        seen[norm] = atom
    mult = {seen[norm].term: c for norm, c in count.items()}
    return PredicatePool(list(seen.values()), pool.raw_count, pool.filtered_count, pool.dropped, mult)


def filter_trivial(pool: PredicatePool, session: SolverSession, encode=None) -> PredicatePool:
    """Drop atoms the solver proves valid or unsatisfiable.

    User hints are kept as given. ``filtered_count`` becomes the number of
    generated atoms surviving, counting symmetric variants separately, so it
    compares with ``raw_count``.
    """
    encode = encode or (lambda t: t)
    keep, dropped = [], list(pool.dropped)
    for atom in pool.atoms:
        if atom.user_hint:
            keep.append(atom)
            continue
        t = encode(atom.term)
        if session.check_sat([t]).valid or session.check_sat([T.mk_not(t)]).valid:
            dropped.append(atom)
        else:
            keep.append(atom)
    session.release()
    count = sum(pool.multiplicity.get(a.term, 1) for a in keep if not a.user_hint)
    return PredicatePool(keep, pool.raw_count, count, dropped, pool.multiplicity)


def distinguishing(pool, session: SolverSession, chi_c: Counterexample, chi_nc: Counterexample, encode=None):
    """Atoms that differ between the two models, with the polarity of chi_c."""
    encode = encode or (lambda t: t)
    out = []
    for atom in pool:
        t = encode(atom.term)
        try:
            vc = session.get_value(chi_c, t)
            vn = session.get_value(chi_nc, t)
        except (SolverError, KeyError) as exc:
            log.warning("cannot evaluate %s: %s", atom, exc)
            continue
        if not isinstance(vc, bool) or not isinstance(vn, bool):
            log.warning("non-boolean value for %s: %r %r", atom, vc, vn)
            continue
        if vc != vn:
            out.append((atom, vc))
    return out
