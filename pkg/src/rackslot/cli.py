"""``rackslot`` command line: generate, solve, exact, count, export-qubo, bench.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from . import __version__
from .annealer import Operator, SAConfig, run_sa
from .bench import ExperimentPlan, chain_length, parse_chain_rule, run_experiment, run_time_to_target
from .exact import brute_force_optimum, count_feasible, count_lower_bound_log10, count_solutions_exact
from .instances import GeneratorSpec, generate_square, load_instance, save_instance
from .model import check_feasible, objective_lambda
from .qubo import PenaltyWeights, SlackMode, build_qubo, decode_bits, default_weights, export_ising, export_qubo, to_ising

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _weights(text: str | None, instance) -> PenaltyWeights:
    if text is None:
        return default_weights(instance)
    vals = _float_list(text)
    if len(vals) != 3:
        raise UsageError("--weights expects three values A,B,C")
    return PenaltyWeights(*vals)


def _add_sa_flags(p):
    p.add_argument("--variant", choices=["bf", "rs"], default="rs")
    p.add_argument("--chain", default="nm", help="n, nm or a fixed chain length")
    p.add_argument("--alpha", type=float, default=0.95)
    p.add_argument("--p0", type=float, default=0.2)
    p.add_argument("--time-budget", type=float, default=5.0, help="seconds per run")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rackslot", description="Flow-rack slotting as a QUBO, solved by simulated annealing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic square-warehouse instance")
    p.add_argument("--shelves", type=int, required=True)
    p.add_argument("--capacity", type=int, default=None, help="slots per shelf (default: number of shelves)")
    p.add_argument("--prefill", type=float, default=0.20)
    p.add_argument("--insert", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None)

    p = sub.add_parser("solve", help="anneal an instance file")
    p.add_argument("instance")
    _add_sa_flags(p)
    p.add_argument("--weights", default=None, help="A,B,C penalty weights")
    p.add_argument("--slack", choices=[m.value for m in SlackMode], default="bounded")
    p.add_argument("--trace", default=None, help="write the best-so-far trace as CSV")

    p = sub.add_parser("exact", help="brute-force optimum and feasible count of a small instance")
    p.add_argument("instance")

    p = sub.add_parser("count", help="solution-space size for unit-cost pallets")
    p.add_argument("--shelves", type=int)
    p.add_argument("--capacity", type=int)
    p.add_argument("--capacities", type=_int_list)
    p.add_argument("--items", type=int, required=True)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--lower-bound", action="store_true")

    p = sub.add_parser("export-qubo", help="write the QUBO (or Ising) model of an instance")
    p.add_argument("instance")
    p.add_argument("--weights", default=None)
    p.add_argument("--slack", choices=[m.value for m in SlackMode], default="bounded")
    p.add_argument("--ising", action="store_true")
    p.add_argument("--output", default=None)

    p = sub.add_parser("bench", help="run the size x insertion sweep and write a results CSV")
    p.add_argument("--sizes", type=_int_list, default=[10, 15, 20, 25])
    p.add_argument("--prefill", type=float, default=0.20)
    p.add_argument("--inserts", type=_float_list, default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    p.add_argument("--variants", default="bf,rs")
    p.add_argument("--chains", default="n,nm")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--time-budget", type=float, default=5.0)
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.95)
    p.add_argument("--p0", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--instance", default=None, help="use this instance file in every cell")
    p.add_argument("--no-optimum", action="store_true", help="skip the brute-force gap column")
    p.add_argument("--time-to-target", action="store_true")
    p.add_argument("--target", type=float, default=None)
    p.add_argument("--margin", type=float, default=0.03)
    p.add_argument("--output", default=None)
    return parser


def _cmd_generate(args, out):
    spec = GeneratorSpec(args.shelves, args.capacity, args.prefill, args.insert, seed=args.seed)
    inst = generate_square(spec)
    if args.output:
        save_instance(inst, args.output)
        print(f"wrote {args.output}: {inst.num_shelves} shelves, {inst.num_pallets} pallets", file=out)
    else:
        save_instance(inst, out)
        out.write("\n")


def _cmd_solve(args, out):
    inst = load_instance(args.instance)
    weights = _weights(args.weights, inst)
    config = SAConfig(alpha=args.alpha, accept_p0=args.p0, chain_length=chain_length(args.chain, inst),
                      max_wall_time=args.time_budget, seed=args.seed,
                      operator_set=Operator.BITFLIP if args.variant == "bf" else Operator.REAL_SWAP,
                      max_iterations=args.max_iterations)
    if args.variant == "bf":
        model = build_qubo(inst, weights, args.slack)
        result = run_sa(model, config)
        assignment = decode_bits(model, result.best_solution).assignment
    else:
        result = run_sa((inst, weights), config)
        assignment = result.best_solution
    print(f"variant {args.variant}", file=out)
    print(f"seed {args.seed}", file=out)
    print(f"chain_length {config.chain_length}", file=out)
    print(f"energy {result.best_energy!r}", file=out)
    print(f"iterations {result.iterations}", file=out)
    if assignment is None:
        print("assignment invalid", file=out)
    else:
        report = check_feasible(inst, assignment)
        print(f"objective {objective_lambda(inst, assignment)!r}", file=out)
        print(f"feasible {'yes' if report.feasible else 'no'}", file=out)
        print("assignment " + " ".join(map(str, assignment.shelf_of)), file=out)
    print(f"wall_time_s {result.wall_time:.3f}", file=sys.stderr)
    if args.trace:
        with open(args.trace, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "best_energy"])
            for it, e in result.energy_trace:
                w.writerow([it, repr(e)])


def _cmd_exact(args, out):
    inst = load_instance(args.instance)
    assignment, value = brute_force_optimum(inst)
    print(f"optimum {value!r}", file=out)
    print("assignment " + " ".join(map(str, assignment.shelf_of)), file=out)
    print(f"count {count_feasible(inst)}", file=out)


def _cmd_count(args, out):
    if args.capacities is not None:
        caps = args.capacities
    elif args.shelves is not None and args.capacity is not None:
        caps = [args.capacity] * args.shelves
    else:
        raise UsageError("count needs --capacities, or --shelves with --capacity")
    both = not (args.exact or args.lower_bound)
    if args.exact or both:
        print(f"exact {count_solutions_exact(caps, args.items)}", file=out)
    if args.lower_bound or both:
        value, floor_exp = count_lower_bound_log10(caps, args.items)
        print(f"log10_lower_bound {value:.6f}", file=out)
        print(f"floor_exponent {floor_exp}", file=out)


def _cmd_export(args, out):
    inst = load_instance(args.instance)
    model = build_qubo(inst, _weights(args.weights, inst), args.slack)
    dest = args.output or out
    if args.ising:
        export_ising(to_ising(model), dest)
    else:
        export_qubo(model, dest)


def _cmd_bench(args, out):
    variants = [v.strip().upper() for v in args.variants.split(",") if v.strip()]
    chains = [parse_chain_rule(c) for c in args.chains.split(",") if c.strip()]
    plan = ExperimentPlan(sizes=args.sizes, prefill=args.prefill, insert_fractions=args.inserts,
                          sa_variants=variants, chain_rules=chains, runs_per_cell=args.runs,
                          time_budget_per_run=args.time_budget, base_seed=args.seed, alpha=args.alpha,
                          accept_p0=args.p0, max_iterations=args.max_iterations)
    try:
        plan.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    instance = load_instance(args.instance) if args.instance else None
    dest = args.output or out
    if args.time_to_target:
        run_time_to_target(plan, dest, args.target, args.margin, args.jobs, instance)
    else:
        run_experiment(plan, dest, args.jobs, instance, with_optimum=not args.no_optimum)


COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "exact": _cmd_exact,
    "count": _cmd_count,
    "export-qubo": _cmd_export,
    "bench": _cmd_bench,
}


def cmd_dispatch(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"rackslot: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main():
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(cmd_dispatch())
