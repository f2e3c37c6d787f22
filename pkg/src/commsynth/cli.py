"""Command-line driver: parse, pre-check, lift, generate predicates, refine, report."""

from __future__ import annotations

import argparse
import itertools
import logging
import signal
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import __version__
from .errors import SolverError, SpecError
from .lift import bind, check_consistent, check_deterministic, check_reflexive, emit_lifted, lift
from .predicates import filter_trivial, pgen
from .refine import refine, simplify, validate_outcome
from .report import PairReport, emit_run
from .smt import SolverSession, resolve_solver
from .spec import AdtSpec, load_spec, rename_apart

log = logging.getLogger("commsynth")

EXIT_OK = 0
EXIT_FAILURE = 1  # validation failed, solver could not run, pre-check violated
EXIT_USAGE = 2  # bad arguments or an unparsable spec
EXIT_NONDETERMINISTIC = 3

KINDS = ("commute", "rmover", "lmover")
# quantified consistency queries can stall; they only produce warnings, so cap them
CONSISTENCY_TIMEOUT_MS = 5000


@dataclass
class RunConfig:
    spec: str
    pairs: str = "all"
    kind: str = "commute"
    heuristic: str = "poke"
    solver: str | None = None
    timeout_ms: int | None = None
    budget: int | None = None
    max_depth: int | None = None
    validate: bool = False
    simplify: bool = False
    log_smt: str | None = None
    jobs: int = 1
    check_consistency: bool = True
    stop: threading.Event = field(default_factory=threading.Event)


@dataclass
class RunResult:
    status: int
    spec: AdtSpec | None = None
    reports: list = field(default_factory=list)
    messages: list = field(default_factory=list)


def select_pairs(spec: AdtSpec, selector: str, kind: str) -> list:
    names = [m.name for m in spec.methods]
    if selector in (None, "", "all"):
        if kind == "commute":
            return list(itertools.combinations_with_replacement(names, 2))
        return list(itertools.product(names, repeat=2))
    pairs = []
    for item in selector.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise SpecError(f"pair {item!r} is not of the form m:n")
        a, b = (p.strip() for p in item.split(":", 1))
        spec.method(a), spec.method(b)
        pairs.append((a, b))
    return pairs


def precheck(spec: AdtSpec, methods, session: SolverSession, consistency: SolverSession | None = None):
    """Reflexivity, determinism and (optionally) consistency of the methods used.

    Returns ``(exit status, messages)``.
    """
    msgs = []
    v = check_reflexive(spec, session)
    if v.kind == "not reflexive":
        return EXIT_FAILURE, [f"error: {v.detail}"]
    if not v:
        msgs.append(f"warning: could not confirm states_equal is reflexive ({v.detail})")
    for name in methods:
        m = spec.method(name)
        v = check_deterministic(spec, m, session)
        if v.kind == "counterexample":
            return EXIT_NONDETERMINISTIC, msgs + [f"error: method {name} is not deterministic: {v.detail}"]
        if not v:
            msgs.append(f"warning: could not confirm {name} is deterministic ({v.detail})")
        if consistency is not None:
            v = check_consistent(spec, m, consistency)
            if v.kind == "inconsistent":
                return EXIT_FAILURE, msgs + [f"error: method {name} is inconsistent: {v.detail}"]
            if not v:
                msgs.append(f"warning: could not confirm {name} is consistent ({v.detail})")
    return EXIT_OK, msgs


def synthesize_pair(spec: AdtSpec, lifted, pair, config: RunConfig) -> PairReport:
    a, b = spec.method(pair[0]), spec.method(pair[1])
    m, n, _ = rename_apart(a, b)
    label = f"{spec.name}-{pair[0]}-{pair[1]}-{config.kind}"
    enc = lambda t: bind(spec, t, "0")
    with SolverSession(spec.preamble, solver=config.solver, timeout_ms=config.timeout_ms,
                       log_dir=config.log_smt, label=label) as session:
        pool = filter_trivial(pgen(spec, m, n), session, enc)
        outcome = refine(lifted, m, n, pool, config.heuristic, config.budget, session=session, kind=config.kind,
                         max_depth=config.max_depth, should_stop=lambda q: config.stop.is_set())
        if config.simplify:
            outcome = simplify(outcome, session, enc)
    rep = PairReport(tuple(pair), config.kind, outcome, config.heuristic,
                     pool=[str(x) for x in pool], pool_counts=(pool.raw_count, pool.filtered_count), methods=(m, n))
    if config.validate:
        v = validate_outcome(lifted, m, n, outcome, solver=config.solver, timeout_ms=config.timeout_ms)
        rep.validation = dict(v.as_dict(), ok=v.ok)
    return rep


def run(config: RunConfig) -> RunResult:
    """Run the whole pipeline; never raises for user errors."""
    res = RunResult(EXIT_OK)
    if config.kind not in KINDS:
        res.status = EXIT_USAGE
        res.messages.append(f"error: unknown kind {config.kind!r}")
        return res
    try:
        spec = load_spec(config.spec)
        pairs = select_pairs(spec, config.pairs, config.kind)
    except SpecError as exc:
        res.status = EXIT_USAGE
        res.messages.append(f"error: {exc}")
        return res
    res.spec = spec
    try:
        resolve_solver(config.solver)
        used = sorted({p for pair in pairs for p in pair}, key=[m.name for m in spec.methods].index)
        with SolverSession(spec.preamble, solver=config.solver, timeout_ms=config.timeout_ms,
                           log_dir=config.log_smt, label=f"{spec.name}-precheck") as session:
            if config.check_consistency:
                timeout = config.timeout_ms or CONSISTENCY_TIMEOUT_MS
                with SolverSession(spec.preamble, solver=config.solver, timeout_ms=min(timeout, CONSISTENCY_TIMEOUT_MS),
                                   log_dir=config.log_smt, label=f"{spec.name}-consistency") as cs:
                    status, msgs = precheck(spec, used, session, cs)
            else:
                status, msgs = precheck(spec, used, session)
        res.messages.extend(msgs)
        if status != EXIT_OK:
            res.status = status
            return res
        lifted = lift(spec)
        if config.jobs > 1:
            with ThreadPoolExecutor(max_workers=config.jobs) as ex:
                futures = [ex.submit(synthesize_pair, spec, lifted, p, config) for p in pairs]
                res.reports = [f.result() for f in futures]
        else:
            res.reports = [synthesize_pair(spec, lifted, p, config) for p in pairs]
    except SolverError as exc:
        res.status = EXIT_FAILURE
        res.messages.append(f"error: {exc}")
        return res
    for rep in res.reports:
        if not rep.complete:
            res.messages.append(f"warning: {rep.title} is incomplete; some regions are left open")
        if rep.validation is not None and not rep.validation["ok"]:
            res.status = EXIT_FAILURE
            res.messages.append(f"error: validation failed for {rep.title}: {rep.validation}")
    return res


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="commsynth",
                                description="Synthesize commutativity and mover conditions for ADT method pairs.")
    p.add_argument("--spec", required=True, help="YAML spec file, or a bundled corpus name")
    p.add_argument("--pairs", default="all", help="comma-separated m:n pairs, or 'all' (default)")
    p.add_argument("--kind", choices=KINDS, default="commute")
    p.add_argument("--heuristic", choices=("simple", "poke"), default="poke")
    p.add_argument("--solver", help="solver executable (default: $COMMSYNTH_SOLVER, then z3 on PATH)")
    p.add_argument("--timeout-ms", type=int, help="per-query solver timeout (default: $COMMSYNTH_TIMEOUT_MS or 30000)")
    p.add_argument("--budget", type=int, help="maximum solver queries per pair")
    p.add_argument("--max-depth", type=int, help="maximum refinement depth (default: pool size)")
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.add_argument("--validate", action="store_true", help="re-check results in a fresh solver")
    p.add_argument("--simplify", action="store_true", help="drop implied literals and merge sibling regions")
    p.add_argument("--emit-lifted", action="store_true", help="print the lifted spec and exit")
    p.add_argument("--dump-predicates", action="store_true", help="print each pair's predicate pool and exit")
    p.add_argument("--log-smt", metavar="DIR", help="write every query as a replayable .smt2 file")
    p.add_argument("--jobs", type=int, default=1, help="pairs synthesized in parallel")
    p.add_argument("--no-consistency-check", dest="check_consistency", action="store_false",
                   help="skip the per-method consistency pre-check")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _dump_predicates(config: RunConfig, out) -> int:
    spec = load_spec(config.spec)
    pairs = select_pairs(spec, config.pairs, config.kind)
    with SolverSession(spec.preamble, solver=config.solver, timeout_ms=config.timeout_ms) as session:
        for pair in pairs:
            m, n, _ = rename_apart(spec.method(pair[0]), spec.method(pair[1]))
            raw = pgen(spec, m, n)
            pool = filter_trivial(raw, session, lambda t: bind(spec, t, "0"))
            print(f"{pair[0]} / {pair[1]}: {pool.raw_count} generated, {pool.filtered_count} after filtering, "
                  f"{len(pool)} distinct", file=out)
            for atom in pool:
                tag = " (hint)" if atom.user_hint else ""
                print(f"  [{atom.complexity}] {atom}{tag}", file=out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    config = RunConfig(args.spec, args.pairs, args.kind, args.heuristic, args.solver, args.timeout_ms, args.budget,
                       args.max_depth, args.validate, args.simplify, args.log_smt, max(1, args.jobs),
                       args.check_consistency)
    out = sys.stdout
    try:
        if args.emit_lifted:
            out.write(emit_lifted(load_spec(args.spec)))
            return EXIT_OK
        if args.dump_predicates:
            return _dump_predicates(config, out)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    # first Ctrl-C stops refinement gracefully, a second one aborts
    previous = None
    if threading.current_thread() is threading.main_thread():
        def on_sigint(signum, frame):
            if config.stop.is_set():
                raise KeyboardInterrupt
            config.stop.set()
            print("interrupted: finishing with partial results", file=sys.stderr)
        previous = signal.signal(signal.SIGINT, on_sigint)
    try:
        res = run(config)
    finally:
        if previous is not None:
            signal.signal(signal.SIGINT, previous)
    for msg in res.messages:
        print(msg, file=sys.stderr)
    if res.reports:
        solver = None
        try:
            solver = resolve_solver(config.solver)
        except SolverError:
            pass
        text = emit_run(res.spec.name, res.reports, args.format, solver=solver, kind=config.kind,
                        heuristic=config.heuristic)
        print(text, file=out)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
