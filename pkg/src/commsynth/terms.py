"""Sorted terms over the SMT-LIB vocabulary used by ADT specifications.

Terms are immutable and hashable so they can be used as dictionary keys
(predicate pools, model caches). Operators use the CVC4 spelling of the
set theory (``member``, ``singleton``, ``setminus``, ...); the cvc5
``set.*`` spellings are accepted on input and mapped onto these.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .errors import SortError, SpecReferenceError, SpecSyntaxError
from .sexpr import SexprError, String, parse_all, parse_one


@dataclass(frozen=True)
class Sort:
    name: str
    params: tuple = ()

    def __str__(self):
        if not self.params:
            return self.name
        return "(" + " ".join([self.name, *map(str, self.params)]) + ")"

    @property
    def is_set(self):
        return self.name == "Set"

    @property
    def is_array(self):
        return self.name == "Array"


INT = Sort("Int")
BOOL = Sort("Bool")


def set_of(elem: Sort) -> Sort:
    return Sort("Set", (elem,))


def array_of(index: Sort, value: Sort) -> Sort:
    return Sort("Array", (index, value))


class Term:
    __slots__ = ()
    sort: Sort

    def __str__(self):
        return to_smt(self)


@dataclass(frozen=True)
class Const(Term):
    value: object
    sort: Sort


@dataclass(frozen=True)
class Var(Term):
    name: str
    sort: Sort


@dataclass(frozen=True)
class App(Term):
    op: str
    args: tuple
    sort: Sort


TRUE = Const(True, BOOL)
FALSE = Const(False, BOOL)

_ALIASES = {
    "set.member": "member",
    "set.singleton": "singleton",
    "set.union": "union",
    "set.inter": "intersection",
    "set.minus": "setminus",
    "set.insert": "insert",
    "set.subset": "subset",
}

BUILTIN_OPS = frozenset(
    "not and or => xor = distinct ite + - * div mod abs < <= > >= select store "
    "member singleton union intersection setminus insert subset".split()
)
SYMMETRIC_OPS = frozenset({"=", "distinct", "and", "or", "+", "*"})


class Signature:
    """Sorts and function symbols known beyond the built-in theories."""

    def __init__(self):
        self.sorts: dict[str, Sort] = {"Int": INT, "Bool": BOOL}
        self.functions: dict[str, tuple[tuple, Sort]] = {}
        self.constructors: dict[str, Sort] = {}

    def copy(self):
        other = Signature()
        other.sorts = dict(self.sorts)
        other.functions = dict(self.functions)
        other.constructors = dict(self.constructors)
        return other

    def enum_values(self, sort: Sort) -> list[str]:
        return [c for c, s in self.constructors.items() if s == sort]

    def declare_sort(self, name):
        if name in self.sorts:
            raise SortError(f"sort {name!r} declared twice")
        self.sorts[name] = Sort(name)

    def parse_sort(self, expr) -> Sort:
        if isinstance(expr, str) and not isinstance(expr, String):
            expr = str(expr)
            if expr in self.sorts:
                return self.sorts[expr]
            if expr.startswith("("):
                return self.parse_sort(_parse_or_raise(expr))
            raise SpecReferenceError(f"undeclared sort {expr!r}")
        if isinstance(expr, list) and expr:
            head = str(expr[0])
            if head == "Set" and len(expr) == 2:
                return set_of(self.parse_sort(expr[1]))
            if head == "Array" and len(expr) == 3:
                return array_of(self.parse_sort(expr[1]), self.parse_sort(expr[2]))
        raise SpecReferenceError(f"unsupported sort {expr!r}")

    def load_preamble(self, text: str):
        """Pick up the names declared by a raw SMT-LIB preamble."""
        try:
            commands = parse_all(text or "")
        except SexprError as exc:
            raise SpecSyntaxError(f"bad preamble: {exc}", line=exc.line, col=exc.col) from None
        for cmd in commands:
            if not isinstance(cmd, list) or not cmd:
                continue
            head = str(cmd[0])
            if head == "declare-sort":
                if len(cmd) > 2 and cmd[2] != 0:
                    raise SortError(f"parametric sort {cmd[1]!s} is not supported")
                self.declare_sort(str(cmd[1]))
            elif head == "declare-fun":
                self.functions[str(cmd[1])] = (tuple(self.parse_sort(s) for s in cmd[2]), self.parse_sort(cmd[3]))
            elif head == "declare-const":
                self.functions[str(cmd[1])] = ((), self.parse_sort(cmd[2]))
            elif head == "define-fun":
                params = tuple(self.parse_sort(p[1]) for p in cmd[2])
                self.functions[str(cmd[1])] = (params, self.parse_sort(cmd[3]))
            elif head == "declare-datatypes":
                self._load_datatypes(cmd)
            elif head == "declare-datatype":
                self._load_datatypes([cmd[0], [[cmd[1], 0]], [cmd[2]]])

    def _load_datatypes(self, cmd):
        heads, bodies = cmd[1], cmd[2]
        for (name, _arity), ctors in zip(heads, bodies):
            self.declare_sort(str(name))
            sort = self.sorts[str(name)]
            for ctor in ctors:
                if isinstance(ctor, list):
                    if len(ctor) != 1:
                        raise SortError(f"datatype {name!s}: only enumerations are supported")
                    ctor = ctor[0]
                self.constructors[str(ctor)] = sort


def _parse_or_raise(text):
    try:
        return parse_one(text)
    except SexprError as exc:
        raise SpecSyntaxError(str(exc), line=exc.line, col=exc.col) from None


def _fail(kind, message, expr):
    raise kind(message, line=getattr(expr, "line", None) or None, col=getattr(expr, "col", None) or None)


def _require(cond, message, expr):
    if not cond:
        _fail(SortError, message, expr)


def make_app(op: str, args, sig: Signature | None = None, expr=None) -> App:
    """Build a sort-checked application; raises :class:`SortError`."""
    op = _ALIASES.get(op, op)
    args = tuple(args)
    sorts = [a.sort for a in args]
    where = expr if expr is not None else op

    def all_bool():
        _require(all(s == BOOL for s in sorts), f"{op} expects Bool arguments, got {' '.join(map(str, sorts))}", where)

    def all_int():
        _require(all(s == INT for s in sorts), f"{op} expects Int arguments, got {' '.join(map(str, sorts))}", where)

    if op == "not":
        _require(len(args) == 1, "not takes one argument", where)
        all_bool()
        return App(op, args, BOOL)
    if op in ("and", "or", "xor", "=>"):
        _require(len(args) >= (2 if op in ("xor", "=>") else 1), f"{op}: too few arguments", where)
        all_bool()
        return App(op, args, BOOL)
    if op in ("=", "distinct"):
        _require(len(args) >= 2, f"{op} needs at least two arguments", where)
        _require(len(set(sorts)) == 1, f"{op} over mixed sorts {' '.join(map(str, sorts))}", where)
        return App(op, args, BOOL)
    if op == "ite":
        _require(len(args) == 3 and sorts[0] == BOOL, "ite expects (ite Bool T T)", where)
        _require(sorts[1] == sorts[2], f"ite branches have sorts {sorts[1]} and {sorts[2]}", where)
        return App(op, args, sorts[1])
    if op in ("+", "*", "div", "mod", "-"):
        _require(len(args) >= (1 if op == "-" else 2), f"{op}: too few arguments", where)
        _require(op not in ("div", "mod") or len(args) == 2, f"{op} is binary", where)
        all_int()
        return App(op, args, INT)
    if op == "abs":
        _require(len(args) == 1, "abs takes one argument", where)
        all_int()
        return App(op, args, INT)
    if op in ("<", "<=", ">", ">="):
        _require(len(args) >= 2, f"{op} needs at least two arguments", where)
        all_int()
        return App(op, args, BOOL)
    if op == "select":
        _require(len(args) == 2 and sorts[0].is_array, "select expects (select (Array I V) I)", where)
        _require(sorts[0].params[0] == sorts[1], f"select index sort {sorts[1]} does not match {sorts[0]}", where)
        return App(op, args, sorts[0].params[1])
    if op == "store":
        _require(len(args) == 3 and sorts[0].is_array, "store expects (store (Array I V) I V)", where)
        _require(sorts[0].params == (sorts[1], sorts[2]), f"store arguments {sorts[1]}, {sorts[2]} do not fit {sorts[0]}", where)
        return App(op, args, sorts[0])
    if op == "member":
        _require(len(args) == 2 and sorts[1].is_set and sorts[1].params[0] == sorts[0], f"member expects (member E (Set E)), got {' '.join(map(str, sorts))}", where)
        return App(op, args, BOOL)
    if op == "singleton":
        _require(len(args) == 1, "singleton takes one argument", where)
        return App(op, args, set_of(sorts[0]))
    if op in ("union", "intersection", "setminus"):
        _require(len(args) == 2 and sorts[0].is_set and sorts[0] == sorts[1], f"{op} expects two sets of the same sort", where)
        return App(op, args, sorts[0])
    if op == "subset":
        _require(len(args) == 2 and sorts[0].is_set and sorts[0] == sorts[1], "subset expects two sets of the same sort", where)
        return App(op, args, BOOL)
    if op == "insert":
        _require(len(args) >= 2 and sorts[-1].is_set, "insert expects (insert e ... S)", where)
        _require(all(s == sorts[-1].params[0] for s in sorts[:-1]), "insert: element sort mismatch", where)
        return App(op, args, sorts[-1])
    if sig is not None and op in sig.functions:
        params, ret = sig.functions[op]
        _require(tuple(sorts) == params, f"{op} expects ({' '.join(map(str, params))}), got ({' '.join(map(str, sorts))})", where)
        return App(op, args, ret)
    if sig is not None and op in sig.constructors and not args:
        return App(op, (), sig.constructors[op])
    _fail(SpecReferenceError, f"undeclared operator {op!r}", where)


Macro = Callable[[tuple], Term]


def build_term(expr, env: Mapping[str, Sort], sig: Signature, macros: Mapping[str, Macro] | None = None) -> Term:
    """Turn a parsed s-expression into a sort-checked :class:`Term`.

    ``env`` maps variable names to sorts; anything else must be a built-in
    operator, a preamble declaration, or one of ``macros`` (expanded in place).
    """
    macros = macros or {}
    if isinstance(expr, bool):
        return TRUE if expr else FALSE
    if isinstance(expr, int):
        return Const(expr, INT)
    if isinstance(expr, String):
        _fail(SortError, "string literals are not supported", expr)
    if isinstance(expr, str):
        name = str(expr)
        if name == "true":
            return TRUE
        if name == "false":
            return FALSE
        if name in env:
            return Var(name, env[name])
        if name in sig.constructors:
            return App(name, (), sig.constructors[name])
        if name in sig.functions and not sig.functions[name][0]:
            return App(name, (), sig.functions[name][1])
        if name.startswith("$"):
            _fail(SpecReferenceError, f"placeholder {name} used outside a method's argument range", expr)
        _fail(SpecReferenceError, f"undeclared variable {name!r}", expr)
    if isinstance(expr, list):
        if not expr:
            _fail(SpecSyntaxError, "empty application", expr)
        head = expr[0]
        if isinstance(head, list) and len(head) == 3 and str(head[0]) == "as" and str(head[1]) == "const":
            _fail(SortError, "constant arrays are not supported in specifications", expr)
        if isinstance(head, str) and str(head) == "as":
            what, sort = str(expr[1]), sig.parse_sort(expr[2])
            if what in ("emptyset", "set.empty") and sort.is_set:
                return Const("emptyset", sort)
            _fail(SortError, f"unsupported (as {what} ...)", expr)
        if isinstance(head, str) and str(head) == "-" and len(expr) == 2 and isinstance(expr[1], int):
            return Const(-expr[1], INT)
        if not isinstance(head, str):
            _fail(SpecSyntaxError, "operator position must be a symbol", expr)
        op = str(head)
        args = tuple(build_term(a, env, sig, macros) for a in expr[1:])
        if op in macros:
            return macros[op](args)
        return make_app(op, args, sig, expr)
    _fail(SpecSyntaxError, f"cannot interpret {expr!r}", expr)


def parse_term(text, env, sig, macros=None, *, where=None) -> Term:
    try:
        expr = parse_one(str(text)) if isinstance(text, str) else text
    except SexprError as exc:
        raise SpecSyntaxError(exc.message, where=where, line=exc.line, col=exc.col) from None
    try:
        return build_term(expr, env, sig, macros)
    except (SortError, SpecReferenceError, SpecSyntaxError) as exc:
        if where and not exc.where:
            raise type(exc)(str(exc), where=where) from None
        raise


# -- construction helpers -------------------------------------------------


def mk_not(t: Term) -> Term:
    if t == TRUE:
        return FALSE
    if t == FALSE:
        return TRUE
    return App("not", (t,), BOOL)


def mk_and(*ts: Term) -> Term:
    flat = []
    for t in ts:
        if t == FALSE:
            return FALSE
        if t == TRUE:
            continue
        flat.append(t)
    if not flat:
        return TRUE
    return flat[0] if len(flat) == 1 else App("and", tuple(flat), BOOL)


def mk_or(*ts: Term) -> Term:
    flat = []
    for t in ts:
        if t == TRUE:
            return TRUE
        if t == FALSE:
            continue
        flat.append(t)
    if not flat:
        return FALSE
    return flat[0] if len(flat) == 1 else App("or", tuple(flat), BOOL)


def mk_eq(a: Term, b: Term) -> Term:
    if a.sort != b.sort:
        raise SortError(f"= over mixed sorts {a.sort} and {b.sort}")
    return App("=", (a, b), BOOL)


def mk_implies(a: Term, b: Term) -> Term:
    if a == FALSE or b == TRUE:
        return TRUE
    if a == TRUE:
        return b
    return App("=>", (a, b), BOOL)


# -- traversal -----------------------------------------------------------


def substitute(t: Term, mapping: Mapping[str, Term]) -> Term:
    if not mapping:
        return t
    if isinstance(t, Var):
        return mapping.get(t.name, t)
    if isinstance(t, App) and t.args:
        args = tuple(substitute(a, mapping) for a in t.args)
        if args != t.args:
            return App(t.op, args, t.sort)
    return t


def rename_vars(t: Term, names: Mapping[str, str]) -> Term:
    """Rename variables, keeping their sorts."""
    return _rename(t, names)


def _rename(t, names):
    if isinstance(t, Var):
        new = names.get(t.name)
        return t if new is None else Var(new, t.sort)
    if isinstance(t, App) and t.args:
        args = tuple(_rename(a, names) for a in t.args)
        if args != t.args:
            return App(t.op, args, t.sort)
    return t


def free_vars(t: Term, acc: dict | None = None) -> dict[str, Sort]:
    acc = {} if acc is None else acc
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            acc[cur.name] = cur.sort
        elif isinstance(cur, App):
            stack.extend(cur.args)
    return acc


def node_count(t: Term) -> int:
    if isinstance(t, App):
        return 1 + sum(node_count(a) for a in t.args)
    return 1


def term_key(t: Term):
    """Fixed total order on terms: smaller first, then lexicographic text."""
    return (node_count(t), to_smt(t))


def normalize(t: Term) -> Term:
    """Order the operands of symmetric operators (recursively)."""
    if not isinstance(t, App) or not t.args:
        return t
    args = tuple(normalize(a) for a in t.args)
    if t.op in SYMMETRIC_OPS:
        args = tuple(sorted(args, key=term_key))
    return App(t.op, args, t.sort)


def fold_constants(t: Term) -> Term:
    """Propagate boolean constants through not/and/or/ite/=>."""
    if not isinstance(t, App) or not t.args:
        return t
    args = tuple(fold_constants(a) for a in t.args)
    if t.op == "not":
        return mk_not(args[0])
    if t.op == "and":
        return mk_and(*args)
    if t.op == "or":
        return mk_or(*args)
    if t.op == "=>" and len(args) == 2:
        if args[0] == FALSE or args[1] == TRUE:
            return TRUE
        if args[0] == TRUE:
            return args[1]
    if t.op == "ite":
        if args[0] == TRUE:
            return args[1]
        if args[0] == FALSE:
            return args[2]
    return App(t.op, args, t.sort)


# -- printing ------------------------------------------------------------


def _const_smt(c: Const, set_printer=None) -> str:
    if c.sort == BOOL:
        return "true" if c.value else "false"
    if c.sort == INT:
        return str(c.value) if c.value >= 0 else f"(- {-c.value})"
    if c.value == "emptyset":
        if set_printer is not None:
            return set_printer(c.sort)
        return f"(as emptyset {c.sort})"
    return str(c.value)


def to_smt(t: Term, names: Mapping[str, str] | None = None) -> str:
    """Print in the input format's own (CVC4-flavoured) SMT-LIB syntax."""
    if isinstance(t, Var):
        return names.get(t.name, t.name) if names else t.name
    if isinstance(t, Const):
        return _const_smt(t)
    if not t.args:
        return t.op
    return "(" + t.op + " " + " ".join(to_smt(a, names) for a in t.args) + ")"


def parse_printed(text: str, env, sig, macros=None) -> Term:
    return parse_term(text, env, sig, macros)


# -- concrete evaluation -------------------------------------------------


class ArrayValue:
    """An immutable total map with a default, for concrete evaluation."""

    __slots__ = ("_items", "default", "_hash")

    def __init__(self, items=(), default=None):
        items = dict(items)
        self._items = {k: v for k, v in items.items() if v != default}
        self.default = default
        self._hash = None

    def __getitem__(self, key):
        return self._items.get(key, self.default)

    def store(self, key, value):
        items = dict(self._items)
        items[key] = value
        return ArrayValue(items, self.default)

    def _canon(self):
        return (frozenset(self._items.items()), self.default)

    def __eq__(self, other):
        return isinstance(other, ArrayValue) and self._canon() == other._canon()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._canon())
        return self._hash

    def __repr__(self):
        return f"ArrayValue({self._items!r}, default={self.default!r})"


def evaluate(t: Term, env: Mapping[str, object], funcs: Mapping[str, Callable] | None = None):
    """Evaluate ``t`` with Python values: int, bool, frozenset, ArrayValue.

    Elements of uninterpreted and enumerated sorts are any hashable values;
    enumeration constructors evaluate to their own name. ``funcs`` supplies
    interpretations for preamble-declared functions.
    """
    funcs = funcs or {}
    if isinstance(t, Const):
        if t.value == "emptyset":
            return frozenset()
        return t.value
    if isinstance(t, Var):
        try:
            return env[t.name]
        except KeyError:
            raise KeyError(f"no value for variable {t.name!r}") from None
    op, args = t.op, t.args
    if op == "ite":
        return evaluate(args[1], env, funcs) if evaluate(args[0], env, funcs) else evaluate(args[2], env, funcs)
    if op == "and":
        return all(evaluate(a, env, funcs) for a in args)
    if op == "or":
        return any(evaluate(a, env, funcs) for a in args)
    if op == "=>":
        vals = [evaluate(a, env, funcs) for a in args]
        result = vals[-1]
        for v in reversed(vals[:-1]):
            result = (not v) or result
        return result
    vals = [evaluate(a, env, funcs) for a in args]
    if op == "not":
        return not vals[0]
    if op == "xor":
        return vals[0] != vals[1]
    if op == "=":
        return all(v == vals[0] for v in vals[1:])
    if op == "distinct":
        return len(set(vals)) == len(vals)
    if op == "+":
        return sum(vals)
    if op == "-":
        return -vals[0] if len(vals) == 1 else vals[0] - sum(vals[1:])
    if op == "*":
        out = 1
        for v in vals:
            out *= v
        return out
    if op == "div":
        a, b = vals
        q = a // b if b > 0 else -(a // -b)
        return q
    if op == "mod":
        a, b = vals
        return a - b * evaluate(App("div", args, INT), env, funcs)
    if op == "abs":
        return abs(vals[0])
    if op in ("<", "<=", ">", ">="):
        cmp = {"<": int.__lt__, "<=": int.__le__, ">": int.__gt__, ">=": int.__ge__}[op]
        return all(cmp(a, b) for a, b in zip(vals, vals[1:]))
    if op == "select":
        return vals[0][vals[1]]
    if op == "store":
        return vals[0].store(vals[1], vals[2])
    if op == "member":
        return vals[0] in vals[1]
    if op == "singleton":
        return frozenset([vals[0]])
    if op == "union":
        return vals[0] | vals[1]
    if op == "intersection":
        return vals[0] & vals[1]
    if op == "setminus":
        return vals[0] - vals[1]
    if op == "subset":
        return vals[0] <= vals[1]
    if op == "insert":
        return vals[-1] | frozenset(vals[:-1])
    if op in funcs:
        return funcs[op](*vals)
    if not args:
        return op
    raise KeyError(f"no interpretation for function {op!r}")


def iter_subterms(t: Term) -> Iterable[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from iter_subterms(a)
