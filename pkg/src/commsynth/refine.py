"""Counterexample-guided refinement of commutativity and mover conditions.

Each method pair is checked over five state snapshots: ``0`` (initial),
``m`` and ``mn`` (m then n), ``n`` and ``nm`` (n then m). Return values
get one copy per execution order (``r1_mn``, ``r1_nm``, ...).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from . import terms as T
from .lift import LiftedSpec, bind
from .predicates import Atom, PredicatePool, distinguishing
from .smt import SolverResult, SolverSession
from .spec import MethodSpec

log = logging.getLogger(__name__)

KINDS = ("commute", "rmover", "lmover")
LEAF_KINDS = ("commute", "noncommute", "unknown", "exhausted", "budget")


# -- regions and conditions -------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """A conjunction of atom literals; ``(atom, True)`` is the atom itself."""

    literals: tuple = ()

    @property
    def depth(self):
        return len(self.literals)

    def atoms(self):
        return [a for a, _ in self.literals]

    def extend(self, atom: Atom, polarity: bool) -> "Region":
        if atom in self.atoms():
            raise ValueError(f"atom {atom} already constrains this region")
        return Region(self.literals + ((atom, polarity),))

    def to_term(self, encode=None) -> T.Term:
        lits = []
        for atom, pol in self.literals:
            t = encode(atom.term) if encode else atom.term
            lits.append(t if pol else T.mk_not(t))
        return T.mk_and(*lits)

    def key(self):
        return frozenset((a.term, p) for a, p in self.literals)


@dataclass
class Condition:
    disjuncts: list = field(default_factory=list)
    kind: str = "commute"

    def to_term(self, encode=None) -> T.Term:
        return T.mk_or(*[r.to_term(encode) for r in self.disjuncts])

    def __bool__(self):
        return bool(self.disjuncts)


@dataclass
class Leaf:
    region: Region
    kind: str
    detail: str = ""
    counterexamples: tuple = ()


@dataclass
class Node:
    region: Region
    chosen: tuple | None = None
    children: list = field(default_factory=list)
    leaf: Leaf | None = None


@dataclass
class RefineStats:
    query_count: int = 0
    wall_time_ms: float = 0.0
    leaves: dict = field(default_factory=lambda: {k: 0 for k in LEAF_KINDS})
    max_depth: int = 0
    pool_size: int = 0


@dataclass
class RefineOutcome:
    phi: Condition
    phi_hat: Condition
    complete: bool
    stats: RefineStats
    leaves: list = field(default_factory=list)
    certificates: list = field(default_factory=list)
    tree: Node | None = None
    interrupted: bool = False
    kind: str = "commute"


# -- encodings --------------------------------------------------------------------------


def _rets(method: MethodSpec, order: str) -> dict:
    return {r: T.Var(f"{r}_{order}", s) for r, s in method.returns}


def _region_term(lifted: LiftedSpec, H) -> T.Term:
    if isinstance(H, Region):
        return H.to_term(lambda t: bind(lifted.base, t, "0"))
    return bind(lifted.base, H, "0")


def _chain(lifted: LiftedSpec, m: MethodSpec, n: MethodSpec) -> list:
    return [
        lifted.post(m, "0", "m", _rets(m, "mn")),
        lifted.post(n, "m", "mn", _rets(n, "mn")),
        lifted.post(n, "0", "n", _rets(n, "nm")),
        lifted.post(m, "n", "nm", _rets(m, "nm")),
    ]


def _rets_equal(m: MethodSpec, n: MethodSpec) -> T.Term:
    eqs = []
    for meth in (m, n):
        for r, s in meth.returns:
            eqs.append(T.mk_eq(T.Var(f"{r}_mn", s), T.Var(f"{r}_nm", s)))
    return T.mk_and(*eqs)


def encode_commute_check(lifted: LiftedSpec, m: MethodSpec, n: MethodSpec, H=T.TRUE):
    """(hypothesis, conclusion) whose validity means m and n commute on H."""
    hyp = T.mk_and(_region_term(lifted, H), *_chain(lifted, m, n))
    both_ok = T.mk_and(T.mk_not(lifted.err_var("mn")), T.mk_not(lifted.err_var("nm")))
    concl = T.mk_and(lifted.equal("mn", "nm"), T.mk_implies(both_ok, _rets_equal(m, n)))
    return hyp, concl


def encode_noncommute_check(lifted: LiftedSpec, m: MethodSpec, n: MethodSpec, H=T.TRUE):
    """(hypothesis, conclusion) whose validity means m and n never commute on H.

    From a non-error state, the orders disagree unless both succeed with
    equal final states and equal returns.
    """
    hyp = T.mk_and(_region_term(lifted, H), *_chain(lifted, m, n), T.mk_not(lifted.err_var("0")))
    agree = T.mk_and(T.mk_not(lifted.err_var("mn")), T.mk_not(lifted.err_var("nm")),
                     lifted.base_equal("mn", "nm"), _rets_equal(m, n))
    return hyp, T.mk_not(agree)


def _mover_hyp(lifted, m, n, H):
    return T.mk_and(_region_term(lifted, H), *_chain(lifted, m, n),
                    T.mk_not(lifted.err_var("0")), T.mk_not(lifted.err_var("mn")))


def _mover_agree(lifted, m, n):
    return T.mk_and(T.mk_not(lifted.err_var("nm")), lifted.base_equal("mn", "nm"), _rets_equal(m, n))


def encode_rightmover_check(lifted: LiftedSpec, m: MethodSpec, n: MethodSpec, H=T.TRUE):
    """Validity means: whenever m;n succeeds, n;m reaches the same outcome."""
    return _mover_hyp(lifted, m, n, H), _mover_agree(lifted, m, n)


def encode_nonrightmover_check(lifted: LiftedSpec, m: MethodSpec, n: MethodSpec, H=T.TRUE):
    return _mover_hyp(lifted, m, n, H), T.mk_not(_mover_agree(lifted, m, n))


def encoders(kind: str):
    """Positive and negative check encoders for an analysis kind.

    The encoders take (lifted, m, n, H); for ``lmover`` they swap m and n.
    """
    if kind == "commute":
        return encode_commute_check, encode_noncommute_check
    if kind == "rmover":
        return encode_rightmover_check, encode_nonrightmover_check
    if kind == "lmover":
        return (lambda l, m, n, H=T.TRUE: encode_rightmover_check(l, n, m, H),
                lambda l, m, n, H=T.TRUE: encode_nonrightmover_check(l, n, m, H))
    raise ValueError(f"unknown analysis kind {kind!r}")


# -- the refinement loop ----------------------------------------------------------------


class _Stop(Exception):
    pass


class Engine:
    """Shared state of one refinement run: session, memo, budget."""

    def __init__(self, lifted: LiftedSpec, m: MethodSpec, n: MethodSpec, session: SolverSession, kind="commute",
                 budget=None, memo=True, should_stop=None):
        self.lifted, self.m, self.n, self.session, self.kind = lifted, m, n, session, kind
        self.pos, self.neg = encoders(kind)
        self.budget = budget
        self.memo = {} if memo else None
        self.should_stop = should_stop
        self._enc = {}
        self.start_queries = session.query_count

    @property
    def queries(self):
        return self.session.query_count - self.start_queries

    def enc(self, t: T.Term) -> T.Term:
        out = self._enc.get(t)
        if out is None:
            out = self._enc[t] = bind(self.lifted.base, t, "0")
        return out

    def check(self, which: str, region: Region, pool) -> SolverResult:
        """Run the positive (``"pos"``) or negative check on a region."""
        key = (which, region.key())
        if self.memo is not None and key in self.memo:
            cached = self.memo[key]
            if cached.model is None or all(self.enc(a.term) in cached.model.evaluations for a in pool):
                return cached
        if self.should_stop is not None and self.should_stop(self.queries):
            raise _Stop("interrupted")
        if self.budget is not None and self.queries >= self.budget:
            raise _Stop("budget")
        encode = self.pos if which == "pos" else self.neg
        hyp, concl = encode(self.lifted, self.m, self.n, region)
        res = self.session.check_valid(hyp, concl, [self.enc(a.term) for a in pool])
        if self.memo is not None:
            self.memo[key] = res
        return res

    def counterexamples(self, region, pool):
        """Base case, or the pair of counterexamples for a mixed region."""
        c = self.check("pos", region, pool)
        if c.valid:
            return "commute", None
        if c.inconclusive:
            return "unknown", c
        nc = self.check("neg", region, pool)
        if nc.valid:
            return "noncommute", None
        if nc.inconclusive:
            return "unknown", nc
        return "mixed", (c.model, nc.model)


def choose_simple(pool, session, H, chi_c, chi_nc, encode=None):
    """Least complex distinguishing atom, with chi_c's polarity."""
    cands = distinguishing(pool, session, chi_c, chi_nc, encode)
    if not cands:
        return None
    return min(cands, key=lambda c: c[0].key)


def choose_poke(pool, session, engine: Engine, H, chi_c, chi_nc):
    """One-level lookahead: fewest distinguishing atoms left in both branches."""
    cands = distinguishing(pool, session, chi_c, chi_nc, engine.enc)
    if len(cands) <= 1:
        return cands[0] if cands else None
    scored = []
    for atom, pol in cands:
        rest = pool.without(atom)
        total = 0
        for branch in (True, False):
            region = H.extend(atom, branch)
            kind, detail = engine.counterexamples(region, rest)
            if kind in ("commute", "noncommute"):
                continue
            if kind == "unknown":
                total += len(pool)
                continue
            total += len(distinguishing(rest, session, detail[0], detail[1], engine.enc))
        scored.append((total, atom.key, (atom, pol)))
    scored.sort(key=lambda s: (s[0], s[1]))
    return scored[0][2]


def refine(lifted: LiftedSpec, m: MethodSpec, n: MethodSpec, pool: PredicatePool, heuristic="poke",
           budget=None, *, session: SolverSession, kind="commute", max_depth=None, memo=True,
           should_stop=None) -> RefineOutcome:
    """Grow φ and φ̂ for (m, n) by splitting mixed regions on predicates.

    Stops early (sound, incomplete) on solver unknowns, vocabulary
    exhaustion, the query budget, ``should_stop(queries)`` returning true, or
    a keyboard interrupt.
    """
    if heuristic not in ("simple", "poke"):
        raise ValueError(f"unknown heuristic {heuristic!r}")
    engine = Engine(lifted, m, n, session, kind, budget, memo, should_stop)
    kind_pos, kind_neg = ("commute", "noncommute") if kind == "commute" else ("rmover", "nonrmover")
    out = RefineOutcome(Condition([], kind_pos), Condition([], kind_neg), False, RefineStats(pool_size=len(pool)),
                        kind=kind)
    max_depth = len(pool) if max_depth is None else max_depth
    started = time.monotonic()
    root = Node(Region())
    out.tree = root

    def leaf(node, kind, detail="", cex=()):
        node.leaf = Leaf(node.region, kind, detail, cex)
        out.leaves.append(node.leaf)
        out.stats.leaves[kind] += 1
        out.stats.max_depth = max(out.stats.max_depth, node.region.depth)

    def visit(node: Node, pool: PredicatePool):
        H = node.region
        status, detail = engine.counterexamples(H, pool)
        if status == "commute":
            out.phi.disjuncts.append(H)
            out.certificates.append(("phi", H, engine.queries))
            return leaf(node, "commute")
        if status == "noncommute":
            out.phi_hat.disjuncts.append(H)
            out.certificates.append(("phi_hat", H, engine.queries))
            return leaf(node, "noncommute")
        if status == "unknown":
            return leaf(node, "unknown", detail.text or detail.status)
        chi_c, chi_nc = detail
        if H.depth >= max_depth and len(pool):
            return leaf(node, "budget", "depth limit", (chi_c, chi_nc))
        if heuristic == "simple":
            choice = choose_simple(pool, session, H, chi_c, chi_nc, engine.enc)
        else:
            choice = choose_poke(pool, session, engine, H, chi_c, chi_nc)
        if choice is None:
            return leaf(node, "exhausted",
                        f"no predicate separates {chi_c} (commutes) from {chi_nc} (does not)", (chi_c, chi_nc))
        atom, _ = choice
        node.chosen = choice
        rest = pool.without(atom)
        for branch in (True, False):
            node.children.append(Node(H.extend(atom, branch)))
        for child in node.children:
            visit(child, rest)

    try:
        visit(root, pool)
        out.complete = all(l.kind in ("commute", "noncommute") for l in out.leaves)
    except (_Stop, KeyboardInterrupt) as exc:
        out.interrupted = True
        reason = "budget" if isinstance(exc, _Stop) and str(exc) == "budget" else "interrupted"
        stack = [root]
        while stack:
            node = stack.pop()
            if node.children:
                stack.extend(node.children)
            elif node.leaf is None:
                leaf(node, "budget", reason)
        out.complete = False
    finally:
        session.release()
        out.stats.query_count = engine.queries
        out.stats.wall_time_ms = (time.monotonic() - started) * 1000
    return out


# -- auditing and simplification ------------------------------------------------------------


@dataclass
class ValidationReport:
    phi_sound: str
    phi_hat_sound: str
    covering: str
    complete: bool

    @property
    def ok(self):
        sound = self.phi_sound == "pass" and self.phi_hat_sound == "pass"
        return sound and (self.covering == "pass" or not self.complete)

    def as_dict(self):
        return {"phi_sound": self.phi_sound, "phi_hat_sound": self.phi_hat_sound, "covering": self.covering}


def _verdict(res: SolverResult) -> str:
    if res.valid:
        return "pass"
    if res.invalid:
        return "fail"
    return res.status


def validate_outcome(lifted: LiftedSpec, m: MethodSpec, n: MethodSpec, outcome: RefineOutcome, *,
                     kind=None, solver=None, timeout_ms=None) -> ValidationReport:
    """Re-check φ, φ̂ (and, when complete, φ ∨ φ̂) in a fresh solver."""
    kind = kind or outcome.kind
    pos, neg = encoders(kind)
    with SolverSession(lifted.base.preamble, solver=solver, timeout_ms=timeout_ms, label="validate") as s:
        hyp, concl = pos(lifted, m, n, outcome.phi.to_term())
        a = _verdict(s.check_valid(hyp, concl))
        hyp, concl = neg(lifted, m, n, outcome.phi_hat.to_term())
        b = _verdict(s.check_valid(hyp, concl))
        enc = lambda t: bind(lifted.base, t, "0")
        c = _verdict(s.check_valid(T.TRUE, T.mk_or(outcome.phi.to_term(enc), outcome.phi_hat.to_term(enc))))
    if outcome.complete and c != "pass":
        log.error("complete outcome whose φ ∨ φ̂ is not valid (%s)", c)
    return ValidationReport(a, b, c, outcome.complete)


def simplify_condition(cond: Condition, session: SolverSession, encode=None) -> Condition:
    """Drop implied literals and merge sibling regions; preserves meaning."""
    encode = encode or (lambda t: t)
    regions = []
    for region in cond.disjuncts:
        kept = []
        for atom, pol in region.literals:
            lit = encode(atom.term) if pol else T.mk_not(encode(atom.term))
            before = Region(tuple(kept)).to_term(encode)
            if kept and session.check_valid(before, lit).valid:
                continue
            kept.append((atom, pol))
        regions.append(Region(tuple(kept)))
    session.release()
    changed = True
    while changed:
        changed = False
        for i in range(len(regions)):
            for j in range(i + 1, len(regions)):
                merged = _merge(regions[i], regions[j])
                if merged is not None:
                    regions[i] = merged
                    del regions[j]
                    changed = True
                    break
            if changed:
                break
    unique = []
    for r in regions:
        if r.key() not in [u.key() for u in unique]:
            unique.append(r)
    return Condition(unique, cond.kind)


def _merge(a: Region, b: Region):
    sa, sb = a.key(), b.key()
    if len(sa) != len(sb):
        return None
    diff_a, diff_b = sa - sb, sb - sa
    if len(diff_a) != 1 or len(diff_b) != 1:
        return None
    (ta, pa), (tb, pb) = next(iter(diff_a)), next(iter(diff_b))
    if ta != tb or pa == pb:
        return None
    return Region(tuple(l for l in a.literals if l[0].term != ta))


def simplify(outcome: RefineOutcome, session: SolverSession, encode=None) -> RefineOutcome:
    out = RefineOutcome(simplify_condition(outcome.phi, session, encode),
                        simplify_condition(outcome.phi_hat, session, encode),
                        outcome.complete, outcome.stats, outcome.leaves, outcome.certificates, outcome.tree,
                        outcome.interrupted, outcome.kind)
    return out
