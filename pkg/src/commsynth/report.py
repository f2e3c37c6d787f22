"""Rendering synthesized conditions as text and as structured documents."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import terms as T
from .predicates import Atom
from .refine import Condition, Region, RefineOutcome
from .spec import AdtSpec, MethodSpec

SCHEMA_VERSION = 1
KIND_SYMBOL = {"commute": "⋈", "rmover": "▷", "lmover": "◁"}
_INFIX = {"=": "=", "<": "<", "<=": "≤", ">": ">", ">=": "≥", "+": "+", "-": "-", "*": "*",
          "union": "∪", "intersection": "∩", "setminus": "∖", "=>": "⇒", "subset": "⊆"}


def infix(t: T.Term, top=True) -> str:
    """Human-readable rendering of a term."""
    if isinstance(t, T.Var):
        return t.name
    if isinstance(t, T.Const):
        if t.value == "emptyset":
            return "∅"
        return T.to_smt(t) if t.sort != T.INT or t.value >= 0 else str(t.value)
    op, args = t.op, t.args
    if not args:
        return op
    if op == "not":
        return "¬(" + infix(args[0]) + ")"
    if op == "and":
        return " ∧ ".join(infix(a) if not (isinstance(a, T.App) and a.op == "or") else "(" + infix(a) + ")" for a in args)
    if op == "or":
        return " ∨ ".join("[" + infix(a) + "]" for a in args)
    if op == "member":
        out = f"{infix(args[0], False)} ∈ {infix(args[1], False)}"
    elif op == "singleton":
        return "{" + infix(args[0]) + "}"
    elif op == "insert":
        out = "{" + ", ".join(infix(a) for a in args[:-1]) + "} ∪ " + infix(args[-1], False)
    elif op == "select":
        return f"{infix(args[0], False)}[{infix(args[1])}]"
    elif op == "store":
        return f"{infix(args[0], False)}[{infix(args[1])}←{infix(args[2])}]"
    elif op == "-" and len(args) == 1:
        return "-" + infix(args[0], False)
    elif op in _INFIX:
        out = f" {_INFIX[op]} ".join(infix(a, False) for a in args)
    elif op == "ite":
        return f"ite({', '.join(infix(a) for a in args)})"
    else:
        return f"{op}({', '.join(infix(a) for a in args)})"
    return out if top else "(" + out + ")"


def condition_text(cond: Condition) -> str:
    if not cond.disjuncts:
        return "false"
    parts = [_region_text(r) for r in cond.disjuncts]
    if len(parts) == 1:
        return parts[0]
    return " ∨ ".join("[" + p + "]" for p in parts)


def _region_text(region: Region) -> str:
    if not region.literals:
        return "true"
    lits = []
    for atom, pol in region.literals:
        body = infix(atom.term)
        lits.append(body if pol else "¬(" + body + ")")
    return " ∧ ".join(lits)


@dataclass
class PairReport:
    pair: tuple
    kind: str
    outcome: RefineOutcome | None
    heuristic: str = "poke"
    validation: dict | None = None
    pool: list = field(default_factory=list)
    pool_counts: tuple = (0, 0)
    error: str | None = None
    # the renamed methods, needed to re-parse printed conditions
    methods: tuple = field(default=(), repr=False)

    @property
    def phi(self) -> Condition:
        return self.outcome.phi

    @property
    def phi_hat(self) -> Condition:
        return self.outcome.phi_hat

    @property
    def complete(self) -> bool:
        return bool(self.outcome and self.outcome.complete)

    @property
    def title(self):
        m, n = self.pair
        return f"{m} {KIND_SYMBOL[self.kind]} {n}"


def _condition_doc(cond: Condition) -> dict:
    return {
        "smt": T.to_smt(cond.to_term()),
        "text": condition_text(cond),
        "disjuncts": [[{"atom": T.to_smt(a.term), "polarity": p} for a, p in r.literals] for r in cond.disjuncts],
    }


def report_doc(rep: PairReport) -> dict:
    doc = {"pair": list(rep.pair), "kind": rep.kind, "heuristic": rep.heuristic}
    if rep.error:
        doc["error"] = rep.error
    if rep.outcome is not None:
        o = rep.outcome
        doc.update({
            "phi": _condition_doc(o.phi),
            "phi_hat": _condition_doc(o.phi_hat),
            "complete": o.complete,
            "interrupted": o.interrupted,
            "stats": {
                "queries": o.stats.query_count,
                "wall_time_ms": round(o.stats.wall_time_ms, 1),
                "leaves": dict(o.stats.leaves),
                "max_depth": o.stats.max_depth,
                "pool_size": o.stats.pool_size,
                "predicates_generated": rep.pool_counts[0],
                "predicates_after_filter": rep.pool_counts[1],
            },
            "leaves": [{"region": [[T.to_smt(a.term), p] for a, p in l.region.literals], "kind": l.kind,
                        "detail": l.detail} for l in o.leaves if l.kind not in ("commute", "noncommute")],
            "certificates": [{"condition": which, "region": [[T.to_smt(a.term), p] for a, p in r.literals],
                              "after_queries": q, "status": "unsat"} for which, r, q in o.certificates],
        })
    if rep.validation is not None:
        doc["validation"] = rep.validation
    return doc


def run_doc(spec_name: str, reports, *, solver=None, kind="commute", heuristic="poke") -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "commsynth",
        "spec": spec_name,
        "kind": kind,
        "heuristic": heuristic,
        "solver": solver,
        "reports": [report_doc(r) for r in reports],
    }


def emit_report(rep: PairReport, fmt="text") -> str:
    if fmt == "structured":
        return json.dumps(report_doc(rep), indent=2, sort_keys=True, ensure_ascii=False)
    lines = []
    if rep.error:
        return f"{rep.title}: error: {rep.error}"
    o = rep.outcome
    status = "complete" if o.complete else "incomplete"
    lines.append(f"{rep.title}  [{status}, {o.stats.query_count} queries, {o.stats.wall_time_ms / 1000:.2f} s]")
    neg = "¬" + KIND_SYMBOL[rep.kind]
    lines.append(f"  {KIND_SYMBOL[rep.kind]}  {condition_text(o.phi)}")
    lines.append(f"  {neg} {condition_text(o.phi_hat)}")
    for l in o.leaves:
        if l.kind not in ("commute", "noncommute"):
            lines.append(f"  open region ({l.kind}): {_region_text(l.region)}" + (f"  -- {l.detail}" if l.detail else ""))
    if rep.validation is not None:
        lines.append("  validation: " + ", ".join(f"{k}={v}" for k, v in rep.validation.items()))
    return "\n".join(lines)


def emit_run(spec_name, reports, fmt="text", **meta) -> str:
    if fmt == "structured":
        return json.dumps(run_doc(spec_name, reports, **meta), indent=2, sort_keys=True, ensure_ascii=False)
    return "\n".join(emit_report(r, fmt) for r in reports)


def condition_env(spec: AdtSpec, m: MethodSpec, n: MethodSpec) -> dict:
    env = dict(spec.state)
    env.update(m.args)
    env.update(n.args)
    return env


def parse_condition(doc: dict, spec: AdtSpec, env: dict, kind="commute") -> Condition:
    """Rebuild a Condition from its structured form."""
    regions = []
    for lits in doc["disjuncts"]:
        regions.append(Region(tuple((Atom(T.parse_term(l["atom"], env, spec.signature)), bool(l["polarity"]))
                                    for l in lits)))
    return Condition(regions, kind)


def load_run(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {doc.get('schema_version')!r}")
    return doc
