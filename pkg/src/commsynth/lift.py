"""Lifting partial specifications to total ones, and the pre-checks."""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from . import terms as T
from .smt import Counterexample, SolverSession, symbol
from .spec import POST_SUFFIX, AdtSpec, MethodSpec, error_flag_name, lifted_equality, rename_apart


@dataclass
class LiftedMethodSpec:
    base: MethodSpec
    lifted_requires: T.Term
    lifted_ensures: T.Term

    @property
    def name(self):
        return self.base.name


@dataclass
class LiftedSpec:
    base: AdtSpec
    err: str
    state: list
    states_equal: T.Term
    methods: list

    def method(self, name) -> LiftedMethodSpec:
        for m in self.methods:
            if m.name == name:
                return m
        return lift_method(self.base, self.base.method(name), self.err)

    def snapshot(self, snap: str) -> dict:
        """Variables of state copy ``snap``, error flag included."""
        return {f"{v}_{snap}": s for v, s in self.state}

    def err_var(self, snap: str) -> T.Var:
        return T.Var(f"{self.err}_{snap}", T.BOOL)

    def equal(self, a: str, b: str) -> T.Term:
        """Lifted state equality between snapshots ``a`` and ``b``."""
        mapping = {}
        for v, s in self.state:
            mapping[v + "_1"] = T.Var(f"{v}_{a}", s)
            mapping[v + "_2"] = T.Var(f"{v}_{b}", s)
        return T.substitute(self.states_equal, mapping)

    def base_equal(self, a: str, b: str) -> T.Term:
        return self.base.equal_states(snapshot_vars(self.base, a), snapshot_vars(self.base, b))

    def post(self, method: MethodSpec, pre: str, post: str, returns: dict | None = None) -> T.Term:
        """Lifted post of an (already renamed) method from ``pre`` to ``post``."""
        lifted = lifted_ensures(method, self.err)
        mapping = _snapshot_map(self.base, pre, post, returns)
        mapping[self.err] = self.err_var(pre)
        mapping[self.err + POST_SUFFIX] = self.err_var(post)
        return T.substitute(lifted, mapping)


def snapshot_vars(spec: AdtSpec, snap: str) -> dict:
    return {v: T.Var(f"{v}_{snap}", s) for v, s in spec.state}


def _snapshot_map(spec: AdtSpec, pre: str, post: str, returns=None) -> dict:
    mapping = {}
    for v, s in spec.state:
        mapping[v] = T.Var(f"{v}_{pre}", s)
        if post is not None:
            mapping[v + POST_SUFFIX] = T.Var(f"{v}_{post}", s)
    for old, new in (returns or {}).items():
        mapping[old] = new
    return mapping


def bind(spec: AdtSpec, t: T.Term, pre: str, post: str | None = None, returns: dict | None = None) -> T.Term:
    """Rewrite a pre/post term of the base spec onto snapshot variables."""
    return T.substitute(t, _snapshot_map(spec, pre, post, returns))


def lifted_ensures(method: MethodSpec, err: str = "err") -> T.Term:
    e, e2 = T.Var(err, T.BOOL), T.Var(err + POST_SUFFIX, T.BOOL)
    pre, post = method.requires, method.ensures
    return T.App("or", (
        T.App("and", (e, e2), T.BOOL),
        T.App("and", (T.mk_not(e), T.mk_not(e2), pre, post), T.BOOL),
        T.App("and", (T.mk_not(e), e2, T.App("not", (pre,), T.BOOL)), T.BOOL),
    ), T.BOOL)


def lift_method(spec: AdtSpec, m: MethodSpec, err: str | None = None) -> LiftedMethodSpec:
    return LiftedMethodSpec(m, T.TRUE, lifted_ensures(m, err or error_flag_name(spec)))


def lift(spec: AdtSpec) -> LiftedSpec:
    """Totalize every method with an error sink state."""
    err = error_flag_name(spec)
    state = list(spec.state) + [(err, T.BOOL)]
    eq = lifted_equality(T.Var(err + "_1", T.BOOL), T.Var(err + "_2", T.BOOL), spec.states_equal)
    return LiftedSpec(spec, err, state, eq, [lift_method(spec, m, err) for m in spec.methods])


# -- printing the lifted spec -------------------------------------------------------


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_plain(v) for v in value if v is not None]
    if isinstance(value, str):
        return str(value)
    return value


def lifted_ensures_text(method: MethodSpec, err: str = "err") -> str:
    req, ens = method.requires_text, method.ensures_text
    return (f"(or (and {err} {err}{POST_SUFFIX})\n"
            f"    (and (not {err}) (not {err}{POST_SUFFIX}) {req} {ens})\n"
            f"    (and (not {err}) {err}{POST_SUFFIX} (not {req})))")


def lifted_states_equal_text(spec: AdtSpec, err: str = "err") -> str:
    definition = spec.states_equal_text
    if definition is None:
        definition = T.to_smt(spec.states_equal)
    return f"(or (and {err}_1 {err}_2) (and (not {err}_1) (not {err}_2)\n{definition}\n))"


def emit_lifted(spec: AdtSpec) -> str:
    """The lifted specification as a YAML document of the input format."""
    err = error_flag_name(spec)
    doc = {str(k): _plain(v) for k, v in spec.raw.items() if k not in ("methods", "state", "states_equal")}
    doc["name"] = spec.name
    doc["state"] = _plain(spec.raw.get("state") or []) + [{"name": err, "type": "Bool"}]
    doc["states_equal"] = {"definition": lifted_states_equal_text(spec, err)}
    methods = []
    for m in spec.methods:
        entry = {str(k): _plain(v) for k, v in m.raw.items() if k not in ("requires", "ensures")}
        entry.setdefault("args", [])
        entry["requires"] = "true"
        entry["ensures"] = lifted_ensures_text(m, err)
        methods.append(entry)
    doc["methods"] = methods
    return yaml.safe_dump(doc, sort_keys=True)


# -- pre-checks -----------------------------------------------------------------------


@dataclass
class Verdict:
    kind: str
    counterexample: Counterexample | None = None
    detail: str = ""

    def __bool__(self):
        return self.kind in ("deterministic", "consistent", "reflexive")


def check_deterministic(spec: AdtSpec, m: MethodSpec, session: SolverSession) -> Verdict:
    """Do two runs of ``m`` from one state always agree (up to states_equal)?"""
    a, b, _ = rename_apart(m, m)
    # same arguments for both copies, separate return values
    same_args = {y: T.Var(x, s) for (x, s), (y, _) in zip(a.args, b.args)}
    b_ens = T.substitute(b.ensures, same_args)
    pre = bind(spec, a.requires, "0")
    post1 = bind(spec, a.ensures, "0", "d1")
    post2 = bind(spec, b_ens, "0", "d2")
    same = [spec.equal_states(snapshot_vars(spec, "d1"), snapshot_vars(spec, "d2"))]
    for (r, s), (q, _) in zip(a.returns, b.returns):
        same.append(T.mk_eq(T.Var(r, s), T.Var(q, s)))
    res = session.check_valid(T.mk_and(pre, post1, post2), T.mk_and(*same))
    session.release()
    if res.valid:
        return Verdict("deterministic")
    if res.invalid:
        return Verdict("counterexample", res.model, f"{m.name} can reach two different outcomes from {res.model}")
    return Verdict("unknown", detail=res.text or res.status)


def check_consistent(spec: AdtSpec, m: MethodSpec, session: SolverSession) -> Verdict:
    """Does every state satisfying Pre admit some successor and return?"""
    a, _, _ = rename_apart(m, m)
    pre = bind(spec, a.requires, "0")
    post = bind(spec, a.ensures, "0", "d1")
    outer = dict(T.free_vars(pre))
    outer.update({f"{v}_0": s for v, s in spec.state})
    outer.update(dict(a.args))
    bound = {f"{v}_d1": s for v, s in spec.state}
    bound.update(dict(a.returns))
    d = session.dialect
    body = session.declarations(outer)
    body.append(f"(assert {d.term(pre)})")
    neg = d.term(T.mk_not(post))
    if bound:
        binders = " ".join(f"({symbol(v)} {d.sort(s)})" for v, s in sorted(bound.items()))
        neg = f"(forall ({binders}) {neg})"
    body.append(f"(assert {neg})")
    res = session.check_raw(body, outer)
    session.release()
    if res.valid:
        return Verdict("consistent")
    if res.invalid:
        return Verdict("inconsistent", res.model, f"{m.name} has no successor from {res.model}")
    return Verdict("unknown", detail=res.text or res.status)


def check_reflexive(spec: AdtSpec, session: SolverSession) -> Verdict:
    """states_equal must relate every state to itself."""
    here = snapshot_vars(spec, "0")
    res = session.check_valid(T.TRUE, spec.equal_states(here, here))
    session.release()
    if res.valid:
        return Verdict("reflexive")
    if res.invalid:
        return Verdict("not reflexive", res.model, f"states_equal fails to relate {res.model} to itself")
    return Verdict("unknown", detail=res.text or res.status)
