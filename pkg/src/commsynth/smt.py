"""Talking to an external SMT-LIB v2 solver over a pipe."""

from __future__ import annotations

import itertools
import logging
import os
import re
import selectors
import shutil
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import terms as T
from .errors import SolverError
from .sexpr import SexprError, dumps, parse_all

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 30000
SOLVER_ENV = "COMMSYNTH_SOLVER"
TIMEOUT_ENV = "COMMSYNTH_TIMEOUT_MS"
_SIMPLE_SYMBOL = re.compile(r"^[A-Za-z~!@$%^&*_+=<>.?/-][0-9A-Za-z~!@$%^&*_+=<>.?/-]*$")
_session_ids = itertools.count()


def resolve_solver(path=None) -> str:
    candidate = path or os.environ.get(SOLVER_ENV) or "z3"
    found = shutil.which(candidate)
    if found is None and os.path.isfile(candidate) and os.access(candidate, os.X_OK):
        found = candidate
    if found is None:
        raise SolverError(
            f"SMT solver {candidate!r} not found; install z3 (e.g. pip install z3-solver) or cvc5, "
            f"or point --solver / {SOLVER_ENV} at an executable supporting sets and arrays"
        )
    return found


def default_timeout_ms() -> int:
    value = os.environ.get(TIMEOUT_ENV)
    return int(value) if value else DEFAULT_TIMEOUT_MS


# -- dialects -------------------------------------------------------------------


def symbol(name: str) -> str:
    return name if _SIMPLE_SYMBOL.match(name) else "|" + name.replace("|", "") + "|"


class Dialect:
    name = "generic"
    command = ()
    setup = ("(set-option :produce-models true)",)

    def sort(self, s: T.Sort) -> str:
        if not s.params:
            return s.name
        return "(" + " ".join([s.name, *map(self.sort, s.params)]) + ")"

    def term(self, t: T.Term) -> str:
        if isinstance(t, T.Var):
            return symbol(t.name)
        if isinstance(t, T.Const):
            if t.value == "emptyset":
                return self.empty_set(t.sort)
            return T._const_smt(t)
        if not t.args:
            return symbol(t.op)
        return self.app(t, [self.term(a) for a in t.args])

    def app(self, t, args):
        return "(" + t.op + " " + " ".join(args) + ")"

    def empty_set(self, s):
        return f"(as emptyset {self.sort(s)})"

    def timeout_option(self, ms):
        return None


class Z3Dialect(Dialect):
    """z3 has no dedicated set theory: sets are arrays into Bool."""

    name = "z3"
    command = ("-in", "-smt2")

    def sort(self, s):
        if s.is_set:
            return f"(Array {self.sort(s.params[0])} Bool)"
        return super().sort(s)

    def empty_set(self, s):
        return f"((as const {self.sort(s)}) false)"

    def app(self, t, args):
        op = t.op
        if op == "member":
            return f"(select {args[1]} {args[0]})"
        if op == "singleton":
            return f"(store {self.empty_set(t.sort)} {args[0]} true)"
        if op == "insert":
            out = args[-1]
            for e in reversed(args[:-1]):
                out = f"(store {out} {e} true)"
            return out
        if op == "setminus":
            return f"(setminus {args[0]} {args[1]})"
        return super().app(t, args)

    def timeout_option(self, ms):
        return f"(set-option :timeout {int(ms)})"


class Cvc5Dialect(Dialect):
    name = "cvc5"
    command = ("--lang=smt2", "--incremental", "--produce-models")
    setup = ("(set-logic ALL)", "(set-option :produce-models true)")
    _ops = {
        "member": "set.member", "singleton": "set.singleton", "union": "set.union",
        "intersection": "set.inter", "setminus": "set.minus", "insert": "set.insert",
        "subset": "set.subset",
    }

    def empty_set(self, s):
        return f"(as set.empty {self.sort(s)})"

    def app(self, t, args):
        return "(" + self._ops.get(t.op, t.op) + " " + " ".join(args) + ")"

    def timeout_option(self, ms):
        return f"(set-option :tlimit-per {int(ms)})"


class Cvc4Dialect(Cvc5Dialect):
    name = "cvc4"
    command = ("--lang=smt2", "--incremental", "--produce-models", "--finite-model-find")
    _ops = {}

    def empty_set(self, s):
        return Dialect.empty_set(self, s)


def dialect_for(path: str) -> Dialect:
    base = os.path.basename(path).lower()
    if "cvc5" in base:
        return Cvc5Dialect()
    if "cvc4" in base:
        return Cvc4Dialect()
    return Z3Dialect()


# -- results --------------------------------------------------------------------


@dataclass
class Counterexample:
    """A model: concrete values for the free variables of a failed check."""

    assignment: dict
    evaluations: dict = field(default_factory=dict)
    context: tuple | None = field(default=None, repr=False, compare=False)

    def value(self, t: T.Term):
        if t in self.evaluations:
            return self.evaluations[t]
        if isinstance(t, T.Var) and t.name in self.assignment:
            return self.assignment[t.name]
        raise KeyError(T.to_smt(t))

    def __str__(self):
        return "{" + ", ".join(f"{k}={_show(v)}" for k, v in sorted(self.assignment.items())) + "}"


def _show(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


@dataclass
class SolverResult:
    status: str
    model: Counterexample | None = None
    text: str = ""

    def __post_init__(self):
        if self.model is not None and self.status != "sat":
            raise ValueError("a model is only meaningful for sat results")

    @property
    def valid(self):
        return self.status == "unsat"

    @property
    def invalid(self):
        return self.status == "sat"

    @property
    def inconclusive(self):
        return self.status in ("unknown", "timeout", "error")


def _value(expr):
    """Python value of a solver-printed model value, where it has one."""
    if isinstance(expr, int):
        return expr
    if isinstance(expr, str):
        if expr == "true":
            return True
        if expr == "false":
            return False
        return str(expr)
    if isinstance(expr, list) and len(expr) == 2 and expr[0] == "-" and isinstance(expr[1], int):
        return -expr[1]
    return dumps(expr)


# -- the session --------------------------------------------------------------------


class SolverSession:
    """One solver process; queries are isolated with push/pop.

    A satisfiable check leaves its frame open until the next operation so
    that :meth:`get_value` can still ask about the model.
    """

    def __init__(self, preamble: str = "", *, solver=None, timeout_ms=None, log_dir=None, label="session",
                 signature: T.Signature | None = None):
        self.path = resolve_solver(solver)
        self.dialect = dialect_for(self.path)
        self.preamble = preamble or ""
        self.timeout_ms = default_timeout_ms() if timeout_ms is None else int(timeout_ms)
        self.signature = signature
        self.log_dir = Path(log_dir) if log_dir else None
        if self.log_dir:
            self.log_dir.mkdir(parents=True, exist_ok=True)
        self.label = re.sub(r"[^\w.-]+", "_", label)
        self.query_count = 0
        self.restarts = 0
        self._id = next(_session_ids)
        self._frame = None
        self._context = 0
        self._proc = None
        self._buf = b""
        self._start()

    # process plumbing

    def _setup_commands(self):
        cmds = list(self.dialect.setup)
        opt = self.dialect.timeout_option(self.timeout_ms)
        if opt and self.timeout_ms > 0:
            cmds.append(opt)
        if self.preamble.strip():
            cmds.append(self.preamble.strip())
        return cmds

    def _start(self):
        try:
            self._proc = subprocess.Popen(
                [self.path, *self.dialect.command], stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, start_new_session=True,
            )
        except OSError as exc:
            raise SolverError(f"cannot start solver {self.path}: {exc}") from None
        self._buf = b""
        self._frame = None
        out = self._send(self._setup_commands())
        errors = [line for line in out if line.startswith("(error")]
        if errors:
            raise SolverError(f"solver rejected the preamble: {errors[0]}")

    def close(self):
        if self._proc is not None:
            try:
                self._proc.stdin.write(b"(exit)\n")
                self._proc.stdin.flush()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=1)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            for stream in (self._proc.stdin, self._proc.stdout):
                try:
                    stream.close()
                except OSError:
                    pass
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def _restart(self):
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None
        self.restarts += 1
        self._start()

    def _send(self, commands, deadline=None) -> list[str]:
        """Send commands and return the output lines they produced."""
        marker = f"commsynth-sync-{next(_session_ids)}"
        payload = "\n".join(commands) + f'\n(echo "{marker}")\n'
        try:
            self._proc.stdin.write(payload.encode())
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise SolverError(f"solver process died: {exc}") from None
        lines = []
        while True:
            line = self._readline(deadline)
            if line is None:
                raise TimeoutError
            if line.strip().strip('"') == marker:
                return lines
            if line.strip():
                lines.append(line.rstrip())

    def _readline(self, deadline):
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buf:
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                sel = selectors.DefaultSelector()
                sel.register(fd, selectors.EVENT_READ)
                ready = sel.select(remaining)
                sel.close()
                if not ready:
                    return None
            chunk = os.read(fd, 65536)
            if not chunk:
                raise SolverError("solver process closed its output")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode(errors="replace")

    def _deadline(self):
        if self.timeout_ms <= 0:
            return None
        return time.monotonic() + self.timeout_ms / 1000 * 2 + 5

    def _close_frame(self):
        if self._frame is not None:
            self._frame = None
            self._context += 1
            self._send(["(pop 1)"])

    # queries

    def declarations(self, variables: dict) -> list[str]:
        return [f"(declare-fun {symbol(v)} () {self.dialect.sort(s)})" for v, s in sorted(variables.items())]

    def check_valid(self, hypothesis: T.Term, conclusion: T.Term, evaluate=()) -> SolverResult:
        """Is ``hypothesis => conclusion`` valid?  ``unsat`` answers yes.

        On ``sat`` the result carries a model giving every free variable a
        value, plus the values of the ``evaluate`` terms.
        """
        return self.check_sat([hypothesis, T.mk_not(conclusion)], evaluate)

    def check_sat(self, assertions, evaluate=()) -> SolverResult:
        variables = {}
        for a in assertions:
            T.free_vars(a, variables)
        evaluate = list(evaluate)
        for t in evaluate:
            T.free_vars(t, variables)
        body = self.declarations(variables) + [f"(assert {self.dialect.term(a)})" for a in assertions]
        # Boolean terms to evaluate are named by fresh constants: model
        # evaluators may leave e.g. array equalities unreduced, but a
        # constant defined by the query must get a literal value
        probes = {}
        for k, t in enumerate(evaluate):
            if t.sort == T.BOOL and not isinstance(t, T.Const):
                name = f"commsynth.ev.{k}"
                while name in variables:
                    name += "_"
                probes[t] = name
                body.append(f"(declare-fun {symbol(name)} () Bool)")
                body.append(f"(assert (= {symbol(name)} {self.dialect.term(t)}))")
        return self._check(body, variables, evaluate, probes)

    def check_raw(self, body: list[str], variables: dict | None = None) -> SolverResult:
        """Check hand-written SMT-LIB assertions (e.g. with quantifiers)."""
        return self._check(list(body), variables or {}, [])

    def _check(self, body, variables, evaluate, probes=None) -> SolverResult:
        self._close_frame()
        self.query_count += 1
        frame = ["(push 1)", *body]
        self._log(frame)
        try:
            out = self._send(frame)
            errors = [line for line in out if line.startswith("(error")]
            if errors:
                self._send(["(pop 1)"])
                return self._logged(SolverResult("error", text=errors[0]))
            try:
                out = self._send(["(check-sat)"], self._deadline())
            except TimeoutError:
                log.warning("solver exceeded its time limit by a wide margin; restarting it")
                self._restart()
                return self._logged(SolverResult("timeout", text="deadline"))
            status = out[0] if out else ""
            if status == "unknown":
                reason = self._send(["(get-info :reason-unknown)"])
                joined = " ".join(reason)
                self._send(["(pop 1)"])
                kind = "timeout" if re.search(r"timeout|canceled|resource|interrupted", joined) else "unknown"
                return self._logged(SolverResult(kind, text=joined))
            if status == "unsat":
                self._send(["(pop 1)"])
                return self._logged(SolverResult("unsat"))
            if status != "sat":
                self._send(["(pop 1)"])
                return self._logged(SolverResult("error", text=" ".join(out)))
            self._frame = True
            model = self._model(variables, evaluate, probes or {})
            return self._logged(SolverResult("sat", model=model))
        except SolverError as exc:
            self._restart()
            return self._logged(SolverResult("error", text=str(exc)))

    def _model(self, variables, evaluate, probes) -> Counterexample:
        names = sorted(variables)
        assignment = dict(zip(names, self._get_values([symbol(v) for v in names])))
        evaluations = {}
        if evaluate:
            exprs = [symbol(probes[t]) if t in probes else self.dialect.term(t) for t in evaluate]
            evaluations = dict(zip(evaluate, self._get_values(exprs)))
        return Counterexample(assignment, evaluations, context=(self._id, self._context))

    def _get_values(self, exprs) -> list:
        if not exprs:
            return []
        out = self._send(["(get-value (" + " ".join(exprs) + "))"])
        text = "\n".join(out)
        if text.startswith("(error"):
            raise SolverError(f"get-value failed: {text}")
        try:
            parsed = parse_all(text)
        except SexprError as exc:
            raise SolverError(f"cannot parse solver output {text[:200]!r}: {exc}") from None
        if len(parsed) != 1 or len(parsed[0]) != len(exprs):
            raise SolverError(f"unexpected get-value answer {text[:200]!r}")
        return [_value(pair[1]) for pair in parsed[0]]

    def get_value(self, model: Counterexample, t: T.Term):
        """Value of ``t`` under ``model``.

        Answered from the model's cached evaluations when possible, else by
        asking the solver, which only works while the model's frame is open.
        """
        if t == T.TRUE:
            return True
        if t == T.FALSE:
            return False
        if t in model.evaluations:
            return model.evaluations[t]
        if isinstance(t, T.Var) and t.name in model.assignment and t.sort in (T.INT, T.BOOL):
            return model.assignment[t.name]
        if model.context != (self._id, self._context) or self._frame is None:
            raise SolverError("the model's solver context is no longer available")
        missing = set(T.free_vars(t)) - set(model.assignment)
        if missing:
            raise SolverError(f"term mentions variables outside the model: {', '.join(sorted(missing))}")
        (value,) = self._get_values([self.dialect.term(t)])
        if t.sort == T.BOOL and not isinstance(value, bool):
            raise SolverError(f"solver could not reduce {T.to_smt(t)} to a truth value")
        model.evaluations[t] = value
        return value

    def release(self):
        """Drop any model context held open by the last query."""
        self._close_frame()

    # transcripts

    def _log(self, frame):
        self._pending_log = frame if self.log_dir else None

    def _logged(self, result):
        if self.log_dir and getattr(self, "_pending_log", None) is not None:
            name = self.log_dir / f"{self.label}-{self._id:03d}-{self.query_count:05d}.smt2"
            lines = [f"; expected: {result.status}", *self._setup_commands(), *self._pending_log[1:], "(check-sat)", "(exit)"]
            name.write_text("\n".join(lines) + "\n", encoding="utf-8")
            self._pending_log = None
        return result
