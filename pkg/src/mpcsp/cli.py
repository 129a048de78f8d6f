"""Command line: ``solve``, ``gen``, ``bench`` and ``convert``.

Exit codes: 0 solved (or command succeeded), 10 no solution found,
2 usage or input error.
"""
from __future__ import annotations

import argparse
import sys

from .harness import SCHEDULES, SOLVERS, ConfigError, ExperimentConfig, bench, solve, verify
from .instances import GeneratorSpec, NotClauseShaped, ParseError, format_graph, read_graph
from .outcome import Satisfied
from .survey_prop import DomainCapExceeded, EnumerationBudgetExceeded

EXIT_OK = 0
EXIT_UNSAT = 10
EXIT_USAGE = 2

INPUT_ERRORS = (OSError, ParseError, ConfigError, NotClauseShaped, DomainCapExceeded,
                EnumerationBudgetExceeded)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpcsp", description="Message-passing CSP solvers.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("file", help="DIMACS .cnf, edge list .col/.edges, or native .json")
    s.add_argument("--solver", choices=SOLVERS, default="perturbed-bp")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--schedule", choices=SCHEDULES, default="rcsp")
    s.add_argument("--T", type=int, help="initial sweep count / BP iteration cap")
    s.add_argument("--rho", type=float, help="decimation fraction")
    s.add_argument("--m", type=float, help="Parisi parameter for SP solvers")
    s.add_argument("--max-attempts", type=int)
    s.add_argument("--q", type=int, default=3, help="colors for edge-list input")

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--kind", choices=("ksat", "qcol"), required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True, help="number of constraints")
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--q", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output path; format by extension (default: stdout)")

    b = sub.add_parser("bench", help="run an experiment config and write CSV")
    b.add_argument("--config", required=True, help="JSON experiment config")
    b.add_argument("--out", help="CSV path (default: stdout)")
    b.add_argument("--no-timing", action="store_true", help="zero the wall-time column")
    b.add_argument("--workers", type=int, help="override the config's worker count")

    c = sub.add_parser("convert", help="convert between instance formats")
    c.add_argument("src")
    c.add_argument("dst")
    c.add_argument("--q", type=int, default=3, help="colors for edge-list input")
    return p


def _format_assignment(graph, assignment, cnf: bool) -> str:
    if cnf:
        lits = [str(i + 1) if v == 0 else str(-(i + 1)) for i, v in enumerate(assignment)]
        return "v " + " ".join(lits + ["0"])
    return "v " + " ".join(str(int(v)) for v in assignment)


def _cmd_solve(args) -> int:
    graph = read_graph(args.file, args.q)
    params = {k: v for k, v in (("T", args.T), ("rho", args.rho), ("m", args.m),
                                ("max_attempts", args.max_attempts)) if v is not None}
    out = solve(graph, args.solver, args.seed, args.schedule, params)
    if isinstance(out, Satisfied) and verify(graph, out.assignment):
        cnf = not args.file.endswith((".json", ".col", ".edges"))
        print("SATISFIED")
        print(_format_assignment(graph, out.assignment, cnf))
        print(f"c iterations {out.iterations} attempts {out.attempts}")
        return EXIT_OK
    print("UNSATISFIED")
    print(f"c iterations {out.iterations}")
    return EXIT_UNSAT


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _cmd_gen(args) -> int:
    try:
        spec = GeneratorSpec(args.kind, args.n, args.m, k=args.k, q=args.q, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    graph = spec.generate()
    default = "out.cnf" if args.kind == "ksat" else "out.col"
    _emit(format_graph(graph, args.out or default), args.out)
    return EXIT_OK


def _cmd_bench(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        config = ExperimentConfig.from_json(fh.read())
    if args.workers is not None:
        config.workers = args.workers
    _emit(bench(config, timing=not args.no_timing), args.out)
    return EXIT_OK


def _cmd_convert(args) -> int:
    graph = read_graph(args.src, args.q)
    _emit(format_graph(graph, args.dst), args.dst)
    return EXIT_OK


COMMANDS = {"solve": _cmd_solve, "gen": _cmd_gen, "bench": _cmd_bench, "convert": _cmd_convert}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
