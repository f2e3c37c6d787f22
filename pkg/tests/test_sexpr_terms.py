import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commsynth import terms as T
from commsynth.errors import SortError, SpecReferenceError, SpecSyntaxError
from commsynth.sexpr import SexprError, Symbol, dumps, parse_all, parse_one

SIG = T.Signature()
SIG.load_preamble("(declare-sort E 0) (declare-fun f (Int) Int)")
E = T.Sort("E")
SET_E = T.set_of(E)
ARR = T.array_of(E, T.INT)
ENV = {"a": T.INT, "b": T.INT, "p": T.BOOL, "e": E, "g": E, "S": SET_E, "h": ARR}


def test_parse_positions():
    exprs = parse_all("(a\n  (b c))  d")
    assert exprs[0][1].line == 2 and exprs[0][1].col == 3
    assert isinstance(exprs[1], Symbol)


@pytest.mark.parametrize("text", ["(a b", "a)", "(a |b", '(a "b'])
def test_sexpr_errors(text):
    with pytest.raises(SexprError) as info:
        parse_all(text) if text != "a)" else parse_one(text)
    assert info.value.line == 1


def test_dumps_round_trip():
    text = '(a (b c) "s t" |q r| 12)'
    assert dumps(parse_one(text)) == text


def test_sort_errors_carry_position():
    with pytest.raises(SortError) as info:
        T.parse_term("(and p\n  (+ a p))", ENV, SIG)
    assert info.value.line == 2
    with pytest.raises(SpecReferenceError):
        T.parse_term("(= a zz)", ENV, SIG)
    with pytest.raises(SpecSyntaxError):
        T.parse_term("(= a", ENV, SIG)


def test_set_aliases_and_empty():
    t = T.parse_term("(set.member e (set.union S (set.singleton g)))", ENV, SIG)
    assert t.op == "member" and t.args[1].op == "union"
    empty = T.parse_term("(= S (as emptyset (Set E)))", ENV, SIG)
    assert T.evaluate(empty, {"S": frozenset()}) is True


def test_constant_folding_helpers():
    p = T.Var("p", T.BOOL)
    assert T.mk_and(T.TRUE, p) == p
    assert T.mk_and(T.FALSE, p) == T.FALSE
    assert T.mk_or(T.TRUE, p) == T.TRUE
    assert T.mk_not(T.TRUE) == T.FALSE
    assert T.mk_implies(T.FALSE, p) == T.TRUE


def test_normalize_orders_symmetric_operands():
    a = T.parse_term("(= (+ b a) (+ a 1))", ENV, SIG)
    b = T.parse_term("(= (+ 1 a) (+ a b))", ENV, SIG)
    assert T.normalize(a) == T.normalize(b)
    c = T.parse_term("(< a b)", ENV, SIG)
    d = T.parse_term("(< b a)", ENV, SIG)
    assert T.normalize(c) != T.normalize(d)


def test_evaluate_smt_division():
    # SMT-LIB div/mod: remainder is always non-negative
    for x, y in [(7, 2), (-7, 2), (7, -2), (-7, -2)]:
        q = T.evaluate(T.App("div", (T.Const(x, T.INT), T.Const(y, T.INT)), T.INT), {})
        r = T.evaluate(T.App("mod", (T.Const(x, T.INT), T.Const(y, T.INT)), T.INT), {})
        assert 0 <= r < abs(y) and q * y + r == x


def test_array_value_semantics():
    h = T.ArrayValue({"e0": 1}, default=0)
    assert h["e0"] == 1 and h["e1"] == 0
    assert h.store("e0", 0) == T.ArrayValue(default=0)
    t = T.parse_term("(= (select (store h e a) e) (f 3))", ENV, SIG)
    assert T.evaluate(t, {"h": h, "e": "e0", "a": 5}, {"f": lambda v: v + 2}) is True


# -- printer / parser round trip ---------------------------------------------------

def _leaves(sort):
    vars_ = [n for n, s in ENV.items() if s == sort]
    opts = [st.sampled_from([T.Var(n, sort) for n in vars_])] if vars_ else []
    if sort == T.INT:
        opts.append(st.integers(-5, 5).map(lambda v: T.Const(v, T.INT)))
    if sort == T.BOOL:
        opts.append(st.sampled_from([T.TRUE, T.FALSE]))
    if sort == SET_E:
        opts.append(st.just(T.Const("emptyset", SET_E)))
    return st.one_of(opts)


def _terms(sort, depth):
    if depth == 0:
        return _leaves(sort)
    sub = lambda s: _terms(s, depth - 1)
    options = [_leaves(sort)]
    if sort == T.INT:
        options += [
            st.tuples(st.sampled_from(["+", "-", "*"]), sub(T.INT), sub(T.INT)).map(
                lambda x: T.make_app(x[0], (x[1], x[2]), SIG)),
            sub(ARR).flatmap(lambda arr: sub(E).map(lambda k: T.make_app("select", (arr, k), SIG))),
            sub(T.INT).map(lambda x: T.make_app("f", (x,), SIG)),
            st.tuples(sub(T.BOOL), sub(T.INT), sub(T.INT)).map(lambda x: T.make_app("ite", x, SIG)),
        ]
    elif sort == T.BOOL:
        options += [
            sub(T.BOOL).map(lambda x: T.make_app("not", (x,), SIG)),
            st.tuples(st.sampled_from(["and", "or", "=>"]), sub(T.BOOL), sub(T.BOOL)).map(
                lambda x: T.make_app(x[0], (x[1], x[2]), SIG)),
            st.tuples(st.sampled_from(["<", "<=", "="]), sub(T.INT), sub(T.INT)).map(
                lambda x: T.make_app(x[0], (x[1], x[2]), SIG)),
            st.tuples(sub(E), sub(SET_E)).map(lambda x: T.make_app("member", x, SIG)),
            st.tuples(sub(SET_E), sub(SET_E)).map(lambda x: T.make_app("=", x, SIG)),
        ]
    elif sort == SET_E:
        options += [
            sub(E).map(lambda x: T.make_app("singleton", (x,), SIG)),
            st.tuples(st.sampled_from(["union", "intersection", "setminus"]), sub(SET_E), sub(SET_E)).map(
                lambda x: T.make_app(x[0], (x[1], x[2]), SIG)),
            st.tuples(sub(E), sub(SET_E)).map(lambda x: T.make_app("insert", x, SIG)),
        ]
    elif sort == ARR:
        options += [st.tuples(sub(ARR), sub(E), sub(T.INT)).map(lambda x: T.make_app("store", x, SIG))]
    return st.one_of(options)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([T.BOOL, T.INT, SET_E]).flatmap(lambda s: _terms(s, 3)))
def test_print_parse_round_trip(t):
    assert T.parse_term(T.to_smt(t), ENV, SIG) == t


@settings(max_examples=200, deadline=None)
@given(_terms(T.BOOL, 3), st.integers(-3, 3), st.integers(-3, 3), st.booleans(),
       st.sampled_from(["e0", "e1"]), st.sampled_from(["e0", "e1"]))
def test_normalize_preserves_value(t, a, b, p, e, g):
    env = {"a": a, "b": b, "p": p, "e": e, "g": g, "S": frozenset({"e1"}), "h": T.ArrayValue({"e0": 2}, default=0)}
    funcs = {"f": lambda v: 2 * v - 1}
    assert T.evaluate(T.normalize(t), env, funcs) == T.evaluate(t, env, funcs)
    assert T.evaluate(T.fold_constants(t), env, funcs) == T.evaluate(t, env, funcs)
