"""ADT specifications: the YAML input format and its data model."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import yaml

from . import terms as T
from .errors import PlaceholderArityError, SortError, SpecError, SpecReferenceError, SpecSyntaxError
from .sexpr import SexprError, parse_one

log = logging.getLogger(__name__)

KNOWN_KEYS = {"name", "preamble", "state", "states_equal", "methods", "predicates", "options", "predicates_extra"}
KNOWN_OPTIONS = {"logic"}
RESERVED_NAME = re.compile(r"^[xyrs]\d+$")
PLACEHOLDER = re.compile(r"^\$(\d+)$")
POST_SUFFIX = "_new"
# suffixes used for state copies in specs and in the generated encodings
RESERVED_SUFFIXES = (POST_SUFFIX, "_1", "_2", "_0", "_m", "_n", "_mn", "_nm", "_d1", "_d2")


# -- YAML with source positions ---------------------------------------------


class LocStr(str):
    """A YAML string scalar remembering where its text starts."""

    line = 0
    col = 0
    block = False


class _Loader(yaml.SafeLoader):
    pass


def _construct_str(loader, node):
    s = LocStr(loader.construct_scalar(node))
    s.line = node.start_mark.line + 1
    s.col = node.start_mark.column + 1
    s.block = node.style in ("|", ">")
    return s


_Loader.add_constructor("tag:yaml.org,2002:str", _construct_str)


def _text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    return value if isinstance(value, str) else str(value)


def _parse_located(value, env, sig, macros=None, where=None) -> T.Term:
    text = _text(value)
    try:
        expr = parse_one(text)
    except SexprError as exc:
        line, col = _absolute(value, exc.line, exc.col)
        raise SpecSyntaxError(exc.message, where=where, line=line, col=col) from None
    try:
        return T.build_term(expr, env, sig, macros)
    except SpecError as exc:
        line, col = _absolute(value, exc.line, exc.col)
        raise type(exc)(exc.message, where=where, line=line, col=col) from None


def _absolute(value, line, col):
    """Map a position inside a scalar's text to a position in the YAML file."""
    if not isinstance(value, LocStr) or not value.line:
        return line, col
    if line is None:
        return value.line, value.col
    if value.block:
        return value.line + line, col
    return value.line + line - 1, (value.col + col - 1) if line == 1 else col


# -- data model --------------------------------------------------------------


@dataclass
class MethodSpec:
    name: str
    args: list
    returns: list
    requires: T.Term
    ensures: T.Term
    terms: dict = field(default_factory=dict)
    requires_text: str = "true"
    ensures_text: str = "true"
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def arg_names(self):
        return [a for a, _ in self.args]

    @property
    def return_names(self):
        return [r for r, _ in self.returns]

    def hint_terms(self):
        for terms in self.terms.values():
            yield from terms


@dataclass
class AdtSpec:
    name: str
    preamble: str
    state: list
    states_equal: T.Term
    methods: list
    predicates: list
    options: dict
    signature: T.Signature
    predicates_extra: list = field(default_factory=list)
    states_equal_text: str | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def method(self, name) -> MethodSpec:
        for m in self.methods:
            if m.name == name:
                return m
        raise SpecReferenceError(f"no method named {name!r} in {self.name}")

    @property
    def state_names(self):
        return [v for v, _ in self.state]

    @property
    def state_sorts(self):
        return dict(self.state)

    def equal_states(self, a: dict, b: dict) -> T.Term:
        """``states_equal`` instantiated on two snapshots.

        ``a`` and ``b`` map each state-variable name to the term standing for
        it in the respective snapshot.
        """
        mapping = {}
        for v, _ in self.state:
            mapping[v + "_1"] = a[v]
            mapping[v + "_2"] = b[v]
        return T.substitute(self.states_equal, mapping)


def lifted_equality(e1: T.Term, e2: T.Term, base: T.Term) -> T.Term:
    return T.App("or", (
        T.App("and", (e1, e2), T.BOOL),
        T.App("and", (T.mk_not(e1), T.mk_not(e2), base), T.BOOL),
    ), T.BOOL)


def error_flag_name(spec: AdtSpec) -> str:
    """Name of the lifted error flag, avoiding clashes with state variables."""
    taken = set(spec.state_names) | {v + POST_SUFFIX for v in spec.state_names}
    name = "err"
    while name in taken or name + POST_SUFFIX in taken:
        name = "_" + name
    return name


# -- parsing -----------------------------------------------------------------


def _require_list(value, where):
    if value is None:
        return []
    if not isinstance(value, list):
        raise SpecSyntaxError("expected a list", where=where, line=getattr(value, "line", None))
    return value


def _require_map(value, where):
    if not isinstance(value, dict):
        raise SpecSyntaxError("expected a mapping", where=where, line=getattr(value, "line", None))
    return value


def _name(value, where):
    if not isinstance(value, str) or not re.match(r"^[A-Za-z_~!@%^&*+=<>.?/-][\w~!@%^&*+=<>.?/-]*$", value):
        raise SpecSyntaxError(f"invalid identifier {value!r}", where=where, line=getattr(value, "line", None))
    return str(value)


def _typed_list(items, sig, where):
    out = []
    seen = set()
    for i, item in enumerate(_require_list(items, where)):
        loc = f"{where}[{i}]"
        item = _require_map(item, loc)
        if "name" not in item or "type" not in item:
            raise SpecSyntaxError("entries need 'name' and 'type'", where=loc)
        name = _name(item["name"], loc + ".name")
        if name in seen:
            raise SpecError(f"duplicate name {name!r}", where=loc)
        seen.add(name)
        try:
            sort = sig.parse_sort(_text(item["type"]))
        except SpecError as exc:
            raise type(exc)(exc.message, where=loc + ".type", line=getattr(item["type"], "line", None)) from None
        out.append((name, sort))
    return out


def parse_spec(source: str) -> AdtSpec:
    """Parse and sort-check a YAML specification document."""
    try:
        doc = yaml.load(source, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SpecSyntaxError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                              line=mark.line + 1 if mark else None,
                              col=mark.column + 1 if mark else None) from None
    doc = _require_map(doc if doc is not None else {}, "document")
    for key in doc:
        if key not in KNOWN_KEYS:
            log.warning("ignoring unknown top-level key %r", key)
    if "name" not in doc:
        raise SpecSyntaxError("missing 'name'")
    name = str(doc["name"])

    preamble = _text(doc.get("preamble"))
    sig = T.Signature()
    sig.load_preamble(preamble)

    state = _typed_list(doc.get("state"), sig, "state")
    state_names = [v for v, _ in state]
    for v in state_names:
        if RESERVED_NAME.match(v):
            raise SpecError(f"state variable {v!r} clashes with argument/return naming x1, y1, r1, s1, ...", where="state")
        for suffix in RESERVED_SUFFIXES:
            if v.endswith(suffix) and v[: -len(suffix)] in state_names:
                raise SpecError(f"state variable {v!r} clashes with the {suffix} copy of {v[:-len(suffix)]!r}", where="state")

    eq_env = {}
    for v, s in state:
        eq_env[v + "_1"] = s
        eq_env[v + "_2"] = s
    eq_doc = doc.get("states_equal")
    eq_text = None
    if eq_doc is None:
        states_equal = T.mk_and(*[T.mk_eq(T.Var(v + "_1", s), T.Var(v + "_2", s)) for v, s in state])
    else:
        eq_doc = _require_map(eq_doc, "states_equal")
        if "definition" not in eq_doc:
            raise SpecSyntaxError("states_equal needs a 'definition'", where="states_equal")
        eq_text = _text(eq_doc["definition"])
        states_equal = _parse_located(eq_doc["definition"], eq_env, sig, where="states_equal.definition")
        if states_equal.sort != T.BOOL:
            raise SortError("states_equal must be boolean", where="states_equal.definition")

    options = doc.get("options") or {}
    options = _require_map(options, "options")
    for key in options:
        if key not in KNOWN_OPTIONS:
            log.warning("ignoring unknown option %r", key)

    spec = AdtSpec(name=name, preamble=preamble, state=state, states_equal=states_equal, methods=[],
                   predicates=[], options=dict(options), signature=sig, states_equal_text=eq_text, raw=doc)

    macros = {} if "states_equal" in sig.functions else {"states_equal": _states_equal_macro(spec)}
    seen = set()
    for i, mdoc in enumerate(_require_list(doc.get("methods"), "methods")):
        m = _parse_method(_require_map(mdoc, f"methods[{i}]"), spec, macros, f"methods[{i}]")
        if m.name in seen:
            raise SpecError(f"duplicate method {m.name!r}", where=f"methods[{i}]")
        seen.add(m.name)
        spec.methods.append(m)

    for i, pdoc in enumerate(_require_list(doc.get("predicates"), "predicates")):
        where = f"predicates[{i}]"
        pdoc = _require_map(pdoc, where)
        op = str(pdoc.get("name", ""))
        sorts = tuple(sig.parse_sort(_text(s)) for s in _require_list(pdoc.get("type"), where + ".type"))
        probe = tuple(T.Var(f"_p{k}", s) for k, s in enumerate(sorts))
        try:
            app = T.make_app(op, probe, sig)
        except SpecError as exc:
            raise type(exc)(exc.message, where=where, line=getattr(pdoc.get("name"), "line", None)) from None
        if app.sort != T.BOOL:
            raise SortError(f"predicate {op} is not boolean", where=where)
        spec.predicates.append((T._ALIASES.get(op, op), sorts))

    for i, text in enumerate(_require_list(doc.get("predicates_extra"), "predicates_extra")):
        text = _text(text)
        try:
            parse_one(text)
        except SexprError as exc:
            raise SpecSyntaxError(str(exc), where=f"predicates_extra[{i}]") from None
        spec.predicates_extra.append(text)
    return spec


def _states_equal_macro(spec: AdtSpec):
    n = len(spec.state)

    def expand(args):
        if len(args) not in (2 * n, 2 * n + 2):
            raise SortError(f"states_equal takes {2 * n} or {2 * n + 2} arguments, got {len(args)}")
        half = len(args) // 2
        a, b = args[:half], args[half:]
        for (v, s), x, y in zip(spec.state, a, b):
            if x.sort != s or y.sort != s:
                raise SortError(f"states_equal: argument for {v} must have sort {s}")
        base = spec.equal_states({v: x for (v, _), x in zip(spec.state, a)},
                                 {v: y for (v, _), y in zip(spec.state, b)})
        if half == n:
            return base
        if a[-1].sort != T.BOOL or b[-1].sort != T.BOOL:
            raise SortError("states_equal: error-flag arguments must be boolean")
        return lifted_equality(a[-1], b[-1], base)

    return expand


def _parse_method(mdoc, spec: AdtSpec, macros, where) -> MethodSpec:
    sig = spec.signature
    name = _name(mdoc.get("name"), where + ".name")
    where = f"method {name}"
    args = _typed_list(mdoc.get("args"), sig, where + ".args")
    returns = _typed_list(mdoc.get("return"), sig, where + ".return")
    state_names = set(spec.state_names)
    for v, _ in args + returns:
        if v in state_names or v in {s + POST_SUFFIX for s in state_names}:
            raise SpecError(f"argument/return {v!r} shadows a state variable", where=where)
    clash = {a for a, _ in args} & {r for r, _ in returns}
    if clash:
        raise SpecError(f"{sorted(clash)[0]!r} is both an argument and a return value", where=where)

    pre_env = dict(spec.state)
    pre_env.update(args)
    post_env = dict(pre_env)
    post_env.update({v + POST_SUFFIX: s for v, s in spec.state})
    post_env.update(returns)
    err = error_flag_name(spec)
    err_free = {}
    if err not in post_env and err + POST_SUFFIX not in post_env:
        post_env[err] = T.BOOL
        post_env[err + POST_SUFFIX] = T.BOOL
        err_free = {err: T.FALSE, err + POST_SUFFIX: T.FALSE}

    req_raw = mdoc.get("requires", "true")
    ens_raw = mdoc.get("ensures", "true")
    requires = _parse_located(req_raw, pre_env, sig, where=where + ".requires")
    ensures = _parse_located(ens_raw, post_env, sig, macros, where=where + ".ensures")
    for label, t in (("requires", requires), ("ensures", ensures)):
        if t.sort != T.BOOL:
            raise SortError(f"{label} must be boolean, got {t.sort}", where=f"{where}.{label}")
    # an ensures may only talk about the error flag through the lifted
    # states_equal form; in the unlifted relation the flag is false
    if err_free and err_free.keys() & T.free_vars(ensures).keys():
        ensures = T.fold_constants(T.substitute(ensures, err_free))

    hint_env = dict(spec.state)
    hint_env.update(args)
    for k, (_, s) in enumerate(args, start=1):
        hint_env[f"${k}"] = s
    hints = {}
    for key, items in _require_map(mdoc.get("terms") or {}, where + ".terms").items():
        sort = sig.parse_sort(_text(key))
        parsed = []
        for j, item in enumerate(_require_list(items, f"{where}.terms.{key}")):
            if item is None:
                continue
            loc = f"{where}.terms.{key}[{j}]"
            text = _text(item)
            for tok in re.findall(r"\$\d+", text):
                if int(tok[1:]) > len(args) or int(tok[1:]) < 1:
                    raise PlaceholderArityError(f"placeholder {tok} but {name} has {len(args)} argument(s)", where=loc,
                                                line=getattr(item, "line", None))
            t = _parse_located(item if isinstance(item, str) else text, hint_env, sig, where=loc)
            if t.sort != sort:
                raise SortError(f"hint {T.to_smt(t)} has sort {t.sort}, listed under {sort}", where=loc)
            parsed.append(t)
        hints.setdefault(sort, []).extend(parsed)

    return MethodSpec(name=name, args=args, returns=returns, requires=requires, ensures=ensures, terms=hints,
                      requires_text=_text(req_raw), ensures_text=_text(ens_raw), raw=mdoc)


# -- placeholders and renaming ------------------------------------------------


def has_placeholder(t: T.Term) -> bool:
    return any(PLACEHOLDER.match(v) for v in T.free_vars(t))


def instantiate_placeholders(t: T.Term, method: MethodSpec, arg_names) -> T.Term:
    """Replace ``$k`` by the k-th of ``arg_names`` (1-based)."""
    if len(arg_names) != len(method.args):
        raise PlaceholderArityError(f"{method.name} has {len(method.args)} argument(s), got {len(arg_names)} names")
    mapping = {}
    for v, s in T.free_vars(t).items():
        m = PLACEHOLDER.match(v)
        if m:
            k = int(m.group(1))
            if not 1 <= k <= len(arg_names):
                raise PlaceholderArityError(f"placeholder ${k} exceeds the {len(arg_names)} argument(s) of {method.name}")
            mapping[v] = T.Var(arg_names[k - 1], s)
    return T.substitute(t, mapping)


@dataclass(frozen=True)
class VariableMap:
    m: dict
    n: dict


def _rename_method(meth: MethodSpec, arg_prefix: str, ret_prefix: str):
    names = {}
    for k, (a, _) in enumerate(meth.args, start=1):
        names[a] = f"{arg_prefix}{k}"
    for k, (r, _) in enumerate(meth.returns, start=1):
        names[r] = f"{ret_prefix}{k}"
    renamed = replace(
        meth,
        args=[(names[a], s) for a, s in meth.args],
        returns=[(names[r], s) for r, s in meth.returns],
        requires=T.rename_vars(meth.requires, names),
        ensures=T.rename_vars(meth.ensures, names),
        terms={s: [T.rename_vars(t, names) for t in ts] for s, ts in meth.terms.items()},
    )
    return renamed, names


def rename_apart(m: MethodSpec, n: MethodSpec):
    """Give m arguments x1.. / returns r1.. and n arguments y1.. / returns s1.."""
    m2, mmap = _rename_method(m, "x", "r")
    n2, nmap = _rename_method(n, "y", "s")
    return m2, n2, VariableMap(mmap, nmap)


# -- loading -------------------------------------------------------------------


def corpus_names():
    root = resources.files("commsynth") / "corpus"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def corpus_text(name: str) -> str:
    path = resources.files("commsynth") / "corpus" / f"{name}.yaml"
    if not path.is_file():
        raise SpecReferenceError(f"no bundled specification named {name!r} (have: {', '.join(corpus_names())})")
    return path.read_text(encoding="utf-8")


def load_spec(ref) -> AdtSpec:
    """Load a spec from a file path, or by bundled corpus name."""
    path = Path(ref)
    if path.is_file():
        return parse_spec(path.read_text(encoding="utf-8"))
    return parse_spec(corpus_text(str(ref)))
