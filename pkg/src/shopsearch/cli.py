"""Command line front end: gen, solve, dataset, report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import ActionSet, EngineConfig, run_episode
from .instances import Instance, generate_instance, instance_to_json, load_instance_text
from .neighborhoods import OperatorId
from .policies import GreedyPolicy, RandomPolicy, action_frequencies
from .reports import (
    BenchmarkReport,
    benchmark_15x15,
    read_report,
    solve_instances,
    write_report,
)
from .trajectories import finalize, read_dataset, write_dataset
from .wire import ExternalPolicy

_OPERATOR_CHOICES = {
    "ct": OperatorId.CT,
    "cet": OperatorId.CET,
    "ecet": OperatorId.ECET,
    "cei": OperatorId.CEI,
    "roundrobin": None,
}


def _parse_size(text: str) -> tuple[int, int]:
    try:
        j, m = text.lower().split("x")
        return int(j), int(m)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 15x15, got {text!r}")


def _instance_seed(seed: int, j: int, m: int, index: int) -> int:
    return seed * 1_000_003 + j * 1_009 + m * 101 + index


def cmd_gen(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for j, m in args.sizes:
        for i in range(args.count):
            inst = generate_instance(j, m, _instance_seed(args.seed, j, m, i))
            path = out / f"gen-{j}x{m}-{i:04d}.json"
            path.write_text(instance_to_json(inst) + "\n", encoding="utf-8")
            written += 1
    print(f"wrote {written} instances to {out}")
    return 0


def _load_named_instances(tokens: list[str]) -> tuple[list[tuple[str, Instance]], dict[str, int]]:
    """Expand CLI instance tokens; returns (name, instance) pairs and optima."""
    named: list[tuple[str, Instance]] = []
    optima: dict[str, int] = {}
    for token in tokens:
        if token == "ta15":
            for bench in benchmark_15x15():
                named.append((bench.id, bench.instance))
                optima[bench.id] = bench.optimum
            continue
        path = Path(token)
        files = sorted(p for p in path.iterdir() if p.is_file()) if path.is_dir() else [path]
        for file in files:
            instances = load_instance_text(file.read_text(encoding="utf-8"))
            if len(instances) == 1:
                named.append((file.stem, instances[0]))
            else:
                named.extend((f"{file.stem}-{i:04d}", inst)
                             for i, inst in enumerate(instances))
    return named, optima


def _engine_config(args: argparse.Namespace) -> EngineConfig:
    return EngineConfig(
        action_set=ActionSet(args.action_set),
        episode_len=args.steps,
        seed=args.seed,
        perturb_strength=args.perturb_strength,
        rtg_factor=args.rtg_factor,
        context_length=args.context_length,
    )


def _policy_factory(args: argparse.Namespace):
    if args.policy == "greedy":
        op = _OPERATOR_CHOICES[args.operator]
        return lambda: GreedyPolicy(operator=op)
    if args.policy == "random":
        return lambda: RandomPolicy(seed=args.seed)
    if not args.policy_cmd:
        raise SystemExit("--policy external needs --policy-cmd")
    cmd, timeout = args.policy_cmd, args.policy_timeout
    return lambda: ExternalPolicy(cmd, timeout=timeout)


def _config_echo(args: argparse.Namespace) -> dict:
    echo = {
        "policy": args.policy,
        "action_set": args.action_set,
        "steps": args.steps,
        "seed": args.seed,
        "rtg_factor": args.rtg_factor,
        "perturb_strength": args.perturb_strength,
        "context_length": args.context_length,
    }
    if args.policy == "external":
        echo["policy_cmd"] = args.policy_cmd
    if args.policy == "greedy":
        echo["operator"] = args.operator
    return echo


def cmd_solve(args: argparse.Namespace) -> int:
    named, optima = _load_named_instances(args.instances)
    if not named:
        print("no instances found", file=sys.stderr)
        return 2
    if args.no_optima:
        optima = {}
    report = solve_instances(
        named,
        _policy_factory(args),
        _engine_config(args),
        optima=optima,
        workers=args.workers,
        config_echo=_config_echo(args),
    )
    if not args.quiet:
        print(report.to_text())
    if args.out:
        write_report(report, args.out)
    failures = [r for r in report.rows if r.error is not None]
    for row in failures:
        print(f"{row.instance_id}: {row.error}", file=sys.stderr)
    return 1 if failures else 0


def cmd_dataset(args: argparse.Namespace) -> int:
    named, _ = _load_named_instances(args.instances)
    if not named:
        print("no instances found", file=sys.stderr)
        return 2
    records = []
    sizes = set()
    for index, (name, instance) in enumerate(named):
        seed = args.seed + index
        config = EngineConfig(
            action_set=ActionSet(args.action_set),
            episode_len=args.steps,
            seed=seed,
            perturb_strength=args.perturb_strength,
            rtg_factor=args.rtg_factor,
            context_length=args.context_length,
        )
        policy = _policy_factory(args)()
        try:
            episode, _best = run_episode(
                instance, policy, config, instance_id=f"{name}#s{seed}"
            )
        finally:
            close = getattr(policy, "close", None)
            if close is not None:
                close()
        records.extend(episode)
        sizes.add((instance.num_jobs, instance.num_machines))
    meta = write_dataset(
        finalize(records), args.out, sizes=sizes, action_set=args.action_set
    )
    print(f"wrote {meta.num_records} records to {args.out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.frequencies_from:
        _meta, records = read_dataset(args.frequencies_from)
        counts = action_frequencies(records, ActionSet(args.action_set))
        print("action  count")
        for action, count in enumerate(counts):
            print(f"{action:>6}  {count}")
        if not args.inputs:
            return 0
    if not args.inputs:
        print("nothing to report: give --inputs or --frequencies-from", file=sys.stderr)
        return 2
    reports = [(Path(p).stem, read_report(p)) for p in args.inputs]
    id_sets = [tuple(r.instance_id for r in rep.rows) for _, rep in reports]
    if len(set(id_sets)) > 1:
        print("reports cover different instance sets", file=sys.stderr)
        return 2
    if len(reports) == 1:
        print(reports[0][1].to_text())
    else:
        _print_paired(reports)
    if args.series:
        _write_series(reports, args.series)
        print(f"wrote series to {args.series}")
    return 0


def _print_paired(reports: list[tuple[str, BenchmarkReport]]) -> None:
    headers = ["instance", "optimum"] + [name for name, _ in reports]
    table = [headers]
    base = reports[0][1].rows
    for i, row in enumerate(base):
        cells = [row.instance_id, "-" if row.optimum is None else str(row.optimum)]
        for _, rep in reports:
            r = rep.rows[i]
            cells.append("ERROR" if r.error else str(r.best_makespan))
        table.append(cells)
    means = ["mean", ""]
    for _, rep in reports:
        means.append("-" if rep.mean_best is None else f"{rep.mean_best:.1f}")
    table.append(means)
    widths = [max(len(row[c]) for row in table) for c in range(len(headers))]
    for i, row in enumerate(table):
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            print("  ".join("-" * w for w in widths))


def _write_series(reports: list[tuple[str, BenchmarkReport]], path: str) -> None:
    """Tab-separated mean best-so-far makespan per iteration, one column per report."""
    series = [rep.mean_best_series() for _, rep in reports]
    steps = min((len(s) for s in series if s), default=0)
    lines = ["step\t" + "\t".join(name for name, _ in reports)]
    for t in range(steps):
        lines.append(f"{t + 1}\t" + "\t".join(f"{s[t]:.3f}" for s in series))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _add_engine_flags(p: argparse.ArgumentParser, default_steps: int) -> None:
    p.add_argument("--policy", choices=["greedy", "random", "external"], default="greedy")
    p.add_argument("--policy-cmd", default=None,
                   help="external policy command line (spawned per episode stream)")
    p.add_argument("--policy-timeout", type=float, default=10.0,
                   help="seconds to wait for each external action")
    p.add_argument("--operator", choices=sorted(_OPERATOR_CHOICES), default="ct",
                   help="greedy policy operator, or roundrobin")
    p.add_argument("--steps", type=int, default=default_steps)
    p.add_argument("--action-set", choices=["A", "AN", "ANP"], default="ANP")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rtg-factor", type=float, default=1.0)
    p.add_argument("--perturb-strength", type=int, default=5)
    p.add_argument("--context-length", type=int, default=50)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shopsearch",
        description="Job shop local search: instances, episodes, datasets, reports",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate random instances")
    p_gen.add_argument("--sizes", type=_parse_size, nargs="+", required=True,
                       metavar="JxM")
    p_gen.add_argument("--count", type=int, default=10)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_solve = sub.add_parser("solve", help="run search episodes and report makespans")
    p_solve.add_argument("--instances", nargs="+", required=True,
                         help="instance files, directories, or the token ta15")
    _add_engine_flags(p_solve, default_steps=200)
    p_solve.add_argument("--workers", type=int, default=1)
    p_solve.add_argument("--no-optima", action="store_true",
                         help="suppress bundled optima and gap columns")
    p_solve.add_argument("--out", default=None, help="write the report as JSON")
    p_solve.add_argument("--quiet", action="store_true")
    p_solve.set_defaults(func=cmd_solve)

    p_data = sub.add_parser("dataset", help="record finalized trajectories")
    p_data.add_argument("--instances", nargs="+", required=True)
    _add_engine_flags(p_data, default_steps=100)
    p_data.add_argument("--out", required=True)
    p_data.set_defaults(func=cmd_dataset)

    p_rep = sub.add_parser("report", help="tabulate and compare saved reports")
    p_rep.add_argument("--inputs", nargs="*", default=[],
                       help="report JSON files from solve --out")
    p_rep.add_argument("--series", default=None,
                       help="write mean best-so-far series as TSV")
    p_rep.add_argument("--frequencies-from", default=None,
                       help="print an action histogram from a dataset file")
    p_rep.add_argument("--action-set", choices=["A", "AN", "ANP"], default="ANP")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
