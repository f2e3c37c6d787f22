import shutil
import subprocess

import pytest

from commsynth import terms as T
from commsynth.errors import SolverError
from commsynth.smt import SolverSession, default_timeout_ms, dialect_for, resolve_solver, symbol

X = T.Var("x", T.INT)
Y = T.Var("y", T.INT)
E = T.Sort("E")


def lt(a, b):
    return T.App("<", (a, b), T.BOOL)


@pytest.fixture
def session():
    with SolverSession("(declare-sort E 0)") as s:
        yield s


def test_resolve_solver(monkeypatch):
    assert resolve_solver() == shutil.which("z3")
    with pytest.raises(SolverError):
        resolve_solver("/nonexistent/solver")
    monkeypatch.setenv("COMMSYNTH_SOLVER", "/nonexistent/solver")
    with pytest.raises(SolverError):
        resolve_solver()


def test_timeout_env(monkeypatch):
    monkeypatch.setenv("COMMSYNTH_TIMEOUT_MS", "1234")
    assert default_timeout_ms() == 1234


def test_symbol_quoting():
    assert symbol("x1") == "x1"
    assert symbol("a b") == "|a b|"


def test_dialects():
    z3 = dialect_for("/usr/bin/z3")
    cvc5 = dialect_for("/opt/cvc5")
    s = T.parse_term("(member e (singleton e))", {"e": E}, T.Signature())
    assert "select" in z3.term(s)
    assert "set.member" in cvc5.term(s)


def test_valid_and_invalid(session):
    assert session.check_valid(lt(X, Y), lt(X, T.App("+", (Y, T.Const(1, T.INT)), T.INT))).valid
    res = session.check_valid(lt(X, Y), lt(Y, X), evaluate=[lt(X, T.Const(0, T.INT))])
    assert res.invalid
    x, y = res.model.assignment["x"], res.model.assignment["y"]
    assert x < y
    assert res.model.value(lt(X, T.Const(0, T.INT))) == (x < 0)
    # model terms can be queried while the frame is open
    assert session.get_value(res.model, T.App("+", (X, Y), T.INT)) == x + y


def test_queries_are_isolated(session):
    assert session.check_sat([lt(X, T.Const(0, T.INT))]).invalid
    # the previous assertion must not leak into this query
    assert session.check_sat([lt(T.Const(5, T.INT), X)]).invalid
    session.release()
    assert session.query_count == 2


def test_stale_model_is_rejected(session):
    res = session.check_sat([lt(X, Y)])
    session.check_sat([lt(Y, X)])
    with pytest.raises(SolverError):
        session.get_value(res.model, T.App("+", (X, Y), T.INT))


def test_set_evaluation_gives_truth_values(session):
    S = T.Var("S", T.set_of(E))
    member = T.parse_term("(= S (union S (singleton e)))", {"S": S.sort, "e": E}, T.Signature())
    res = session.check_sat([T.TRUE], evaluate=[member])
    assert isinstance(res.model.value(member), bool)


def test_error_status(session):
    res = session.check_raw(["(assert (= x 1))"])  # x undeclared
    assert res.status == "error" and res.inconclusive
    # the session keeps working afterwards
    assert session.check_valid(T.TRUE, T.TRUE).valid


def test_unknown_or_timeout_is_inconclusive():
    # nonlinear integer problem the solver cannot settle in 1 ms
    body = ["(declare-fun a () Int)", "(declare-fun b () Int)", "(declare-fun c () Int)",
            "(assert (> a 0))", "(assert (> b 0))", "(assert (> c 0))",
            "(assert (= (+ (* a a a) (* b b b)) (* c c c)))"]
    with SolverSession(timeout_ms=1) as s:
        res = s.check_raw(body)
        assert res.status in ("timeout", "unknown")
        assert s.check_valid(T.TRUE, T.TRUE).valid


def test_killed_solver_restarts(session):
    session._proc.kill()
    session._proc.wait()
    res = session.check_valid(T.TRUE, T.TRUE)
    assert res.status == "error"
    assert session.restarts == 1
    assert session.check_valid(T.TRUE, T.TRUE).valid


def test_transcripts_replay(tmp_path):
    with SolverSession("(declare-sort E 0)", log_dir=tmp_path, label="t") as s:
        s.check_valid(lt(X, Y), lt(Y, X))
        s.check_valid(lt(X, Y), lt(X, T.App("+", (Y, T.Const(1, T.INT)), T.INT)))
    files = sorted(tmp_path.glob("*.smt2"))
    assert len(files) == 2
    for f in files:
        expected = f.read_text().splitlines()[0].split(":")[1].strip()
        out = subprocess.run([resolve_solver(), "-smt2", str(f)], capture_output=True, text=True, timeout=30)
        assert out.stdout.split()[0] == expected
