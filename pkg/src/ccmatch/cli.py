"""Command-line interface. Exit codes: 0 success, 2 infeasible, 1 any other error."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import generators as gen
from .baselines import greedy, naive_greedy
from .errors import CCMatchError, InfeasibleError
from .io import (dumps_instance, ingest_movielens, loads_instance, matching_solution, rows_csv,
                 run_experiment, solution_csv, solution_from_json, solution_to_json, write_report)
from .network import build_network
from .solver import Status, solve, verify_solution
from .uniform import solve_uniform

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _read_text(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_solution(args, sol, algorithm):
    if args.format == "csv":
        _emit(solution_csv(sol, algorithm), args.out)
    else:
        _emit(json.dumps(solution_to_json(sol, algorithm), indent=1) + "\n", args.out)


def cmd_solve(args):
    inst = loads_instance(_read_text(args.instance))
    _emit_solution(args, solve(inst), "solve")


def _baseline(fn, name, status=Status.HEURISTIC):
    def run(args):
        inst = loads_instance(_read_text(args.instance))
        _emit_solution(args, matching_solution(inst, fn(inst), status), name)
    return run


def _oracle(inst):
    return gen.brute_force_opt(inst)[1]


def cmd_uniform(args):
    inst = loads_instance(_read_text(args.instance))
    _emit_solution(args, solve_uniform(inst, args.q), "uniform")


def cmd_gen(args):
    if args.kind == "indset":
        if args.graph == "random":
            edges = gen.random_graph(args.vertices, args.edge_prob, args.seed)
        else:
            edges = {"path": gen.path_graph, "cycle": gen.cycle_graph,
                     "complete": gen.complete_graph}[args.graph](args.vertices)
        ell = args.ell if args.ell is not None else max(1, args.vertices // 2)
        inst = gen.gen_independent_set_reduction(args.vertices, edges, int(ell))
    else:
        structure = "laminar" if args.kind == "laminar" else args.structure
        inst = gen.gen_random(args.n, args.m, args.density, (args.umin, args.umax), args.groups,
                              structure, args.costs, args.seed, ell=args.ell, depth=args.depth,
                              uniform=args.uniform)
    _emit(dumps_instance(inst), args.out)


def cmd_movielens(args):
    inst = ingest_movielens(args.data, args.users, args.top_k, args.costs, args.ell)
    _emit(dumps_instance(inst), args.out)


def cmd_experiment(args):
    inst = loads_instance(_read_text(args.instance))
    thresholds = [float(t) for t in args.thresholds.split(",") if t.strip()]
    rep = run_experiment(inst, thresholds)
    if args.out_dir:
        write_report(rep, args.out_dir)
    _emit(rows_csv(rep), args.out)


def cmd_verify(args):
    inst = loads_instance(_read_text(args.instance))
    sol = solution_from_json(json.loads(_read_text(args.solution)))
    rep = verify_solution(inst, sol)
    if rep.ok:
        gap = "n/a" if sol.lp_lower_bound is None else format(rep.gap, ".6g")
        bound = "n/a" if sol.additive_bound is None else format(sol.additive_bound, ".6g")
        print(f"OK gap={gap} bound={bound}")
        return EXIT_OK
    print(rep)
    return EXIT_ERROR


def cmd_network(args):
    inst = loads_instance(_read_text(args.instance))
    _emit(build_network(inst).to_edge_list(), args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ccmatch", description="Convex-cost matching with a utility floor.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_instance(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("instance", help="instance JSON file, or - for stdin")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", help="write to this file instead of stdout")
        p.set_defaults(func=fn)
        return p

    with_instance("solve", cmd_solve, "LP-rounding solver (disjoint or laminar groups)")
    with_instance("greedy", _baseline(greedy, "greedy"), "utility/marginal-cost greedy")
    with_instance("naive", _baseline(naive_greedy, "naive"), "highest-utility-first greedy")
    with_instance("oracle", _baseline(_oracle, "oracle", Status.EXACT), "exhaustive search (small instances)")
    p = with_instance("uniform", cmd_uniform, "exact solver for equal utilities")
    p.add_argument("--q", type=float, default=None, help="common edge utility (default: inferred)")

    p = sub.add_parser("gen", help="generate an instance")
    p.add_argument("kind", choices=("random", "laminar", "indset"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--umin", type=int, default=1)
    p.add_argument("--umax", type=int, default=5)
    p.add_argument("--uniform", action="store_true", help="every edge gets utility umin")
    p.add_argument("--groups", type=int, default=2)
    p.add_argument("--structure", choices=("disjoint", "laminar"), default="disjoint")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--costs", choices=gen.COST_KINDS, default="quadratic")
    p.add_argument("--ell", type=float, default=None)
    p.add_argument("--vertices", type=int, default=5)
    p.add_argument("--edge-prob", type=float, default=0.4)
    p.add_argument("--graph", choices=("random", "path", "cycle", "complete"), default="random")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("movielens", help="build an instance from MovieLens-100k files")
    p.add_argument("--data", required=True, help="ratings file (u.data)")
    p.add_argument("--users", required=True, help="users file (u.user)")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--costs", choices=("quadratic", "nsw"), default="quadratic")
    p.add_argument("--ell", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_movielens)

    p = sub.add_parser("experiment", help="compare baselines and solver over thresholds")
    p.add_argument("instance")
    p.add_argument("--thresholds", default="500,1000,1500")
    p.add_argument("--out")
    p.add_argument("--out-dir", help="also write load and group CSVs here")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="check a solution against an instance")
    p.add_argument("instance")
    p.add_argument("solution")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("network", help="dump the flow network as an edge list")
    p.add_argument("instance")
    p.add_argument("--out")
    p.set_defaults(func=cmd_network)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CCMatchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return code or EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
