"""Command-line interface: ``qcausal {analyze,grid,generate,simulate,probe,verify}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from ._io import atomic_write_text
from .acceptance import SUITES, run_check
from .families import cycle, flower, heralding_coin, heralding_coin_reverse, load_bias_matrix, perturbed_coin
from .grid import grid_csv, heralding_grid, parse_axis
from .machines import MachineError, load_machine, machine_json, require_valid
from .optimality import run_probe
from .reversal import StateBudgetError
from .simulator import (
    build_step_operator,
    format_distribution_csv,
    machine_digest,
    machine_word_distribution,
    sample_trajectory,
    total_variation,
    window_distribution,
    write_trajectory,
)
from .spectral import AnalysisConfig, analyze_bidirectional

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INVALID = 2
EXIT_BUDGET = 3

# flag name -> AnalysisConfig field
TOLERANCE_FLAGS = {
    "tol_gram": "gram_tol",
    "tol_merge": "merge_tol",
    "tol_rank": "rank_tol",
    "tol_entropy": "entropy_tol",
    "tol_minimize": "minimize_tol",
    "gram_max_iter": "gram_max_iter",
    "max_states": "max_states",
    "horizon": "horizon",
    "cap": "cap",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with tolerance settings; flags override it")
    p.add_argument("--horizon", type=int, help="longest block length for excess entropy and morph checks")
    p.add_argument("--tol-gram", type=float, help="convergence tolerance of the overlap recursion")
    p.add_argument("--tol-merge", type=float, help="belief-state merge distance during reversal")
    p.add_argument("--tol-rank", type=float, help="eigenvalue cutoff for q-machine rank")
    p.add_argument("--tol-entropy", type=float, help="excess entropy convergence tolerance")
    p.add_argument("--tol-minimize", type=float, help="probability tolerance when merging states")
    p.add_argument("--gram-max-iter", type=int, help="iteration cap for the overlap recursion")
    p.add_argument("--max-states", type=int, help="belief-state budget for reversal")
    p.add_argument("--cap", type=float, help="cap on enumerated mixed states for block entropies")


def load_config(args: argparse.Namespace) -> AnalysisConfig:
    values = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            values = json.load(fh)
        known = {f.name for f in dataclasses.fields(AnalysisConfig)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for flag, key in TOLERANCE_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    return AnalysisConfig(**values)


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _load_valid(path: str):
    m = load_machine(path)
    require_valid(m)
    return m


def cmd_analyze(args) -> int:
    report = analyze_bidirectional(_load_valid(args.machine), load_config(args))
    _emit(report.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_grid(args) -> int:
    ps = parse_axis(args.p, args.step)
    qs = parse_axis(args.q, args.step)
    rows = heralding_grid(ps, qs, load_config(args), jobs=args.jobs)
    _emit(grid_csv(rows), args.out)
    return EXIT_OK


def _biases(spec: str | None):
    if spec is None or spec == "spread":
        return None
    return load_bias_matrix(spec)


def cmd_generate(args) -> int:
    fam = args.family
    if fam in ("perturbed", "heralding", "heralding-reverse"):
        if args.p is None or args.q is None:
            raise ValueError(f"{fam} needs --p and --q")
        make = {"perturbed": perturbed_coin, "heralding": heralding_coin, "heralding-reverse": heralding_coin_reverse}[fam]
        m = make(args.p, args.q)
    elif fam == "flower":
        if args.n is None or args.m is None:
            raise ValueError("flower needs --n and --m")
        m = flower(args.n, args.m, _biases(args.biases))
    else:
        k = args.k if args.k is not None else args.n
        if k is None:
            raise ValueError("cycle needs --k")
        m = cycle(k)
    _emit(machine_json(m) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    m = _load_valid(args.machine)
    op = build_step_operator(m)
    traj = sample_trajectory(op, args.initial, args.length, args.seed)
    digest = machine_digest(m)
    if args.out:
        write_trajectory(args.out, traj, digest, args.seed)
    # Overlapping windows of a long run sample the stationary measure whatever the start state.
    stats = {"machine_sha256": digest, "seed": args.seed, "length": args.length, "window_tv": {}}
    for L in range(1, min(args.stats_length, args.length) + 1):
        stats["window_tv"][str(L)] = total_variation(window_distribution(traj, L), machine_word_distribution(m, L))
    if args.distribution:
        sep = "" if all(len(a) == 1 for a in m.alphabet) else " "
        atomic_write_text(args.distribution, format_distribution_csv(machine_word_distribution(m, args.word_length), sep))
    text = json.dumps(stats, indent=2) + "\n"
    if args.out:
        sys.stdout.write(text)
    else:
        sys.stdout.write("".join(f"{s}\n" for s in traj))
        sys.stderr.write(text)
    return EXIT_OK


def cmd_probe(args) -> int:
    summary = run_probe(per_point=args.per_point, seed=args.seed, keep_verdicts=args.out is not None)
    if args.out:
        atomic_write_text(args.out, summary.to_json() + "\n")
    sys.stdout.write(json.dumps(summary.to_dict(include_verdicts=False)["summary"], indent=2) + "\n")
    return EXIT_OK if summary.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    results = []
    for number in SUITES[args.suite]:
        kwargs = {"seed": args.seed} if number == 7 and args.seed is not None else {}
        results.append(run_check(number, **kwargs))
        print(results[-1].line(), flush=True)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} checks passed")
    return EXIT_OK if n_pass == len(results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcausal",
        description="Classical and quantum memory of stationary processes in both time directions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="complexity report for a machine file")
    p.add_argument("machine", help="machine JSON file")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    _add_config_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("grid", help="heralding-coin sweep over (p, q) as CSV")
    p.add_argument("--p", default="0.1:0.9", help="value or lo:hi range (default 0.1:0.9)")
    p.add_argument("--q", default="0.1:0.9", help="value or lo:hi range (default 0.1:0.9)")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("generate", help="write a machine file for a built-in family")
    p.add_argument("family", choices=["perturbed", "heralding", "heralding-reverse", "flower", "cycle"])
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--n", type=int, help="number of dice (flower)")
    p.add_argument("--m", type=int, help="sides per die (flower)")
    p.add_argument("--k", type=int, help="period (cycle)")
    p.add_argument("--biases", help="'spread' (default) or a CSV file with one die per row")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="sample a trajectory from the unitary generator of a machine")
    p.add_argument("machine")
    p.add_argument("--length", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial", help="start state label (default: drawn from the stationary distribution)")
    p.add_argument("--stats-length", type=int, default=4, help="longest window for the TV statistics")
    p.add_argument("--distribution", help="also write the exact stationary word distribution as CSV")
    p.add_argument("--word-length", type=int, default=4)
    p.add_argument("--out", help="trajectory file; without it symbols go to stdout and stats to stderr")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("probe", help="majorization probe of retro memory candidates")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--per-point", type=int, default=1000)
    p.add_argument("--out", help="full JSON report with every probe")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("verify", help="run acceptance checks")
    p.add_argument("suite", choices=list(SUITES))
    p.add_argument("--seed", type=int, help="seed for the majorization probe")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MachineError as exc:
        print("invalid machine:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INVALID
    except StateBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
