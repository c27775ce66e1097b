"""slotshift command-line front end."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .energy import Platform
from .experiment import CMP_COLUMNS, ExperimentGrid, compare, dumps_csv, read_csv, run_sweep, write_sweep
from .runtime import DeadlineMiss, Policy
from .sim import simulate
from .table import TableError, build_table, dump_tables, expand_jobs, verify_feasible
from .workload import GenSpec, Scenario, Unsatisfiable, generate_taskset

log = logging.getLogger("slotshift")

EXIT_OK, EXIT_MISS, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3

SLOT_NOTE = (
    "Note: the algorithms are slot-granular, so the slot length changes energy only through "
    "the per-slot energy scaling and the sleep break-even arithmetic. Kernel/interrupt overheads "
    "that grow with shorter slots on real hardware are not modeled."
)


class UsageError(Exception):
    pass


def _load_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {path}")
    except json.JSONDecodeError as e:
        raise UsageError(f"{what} file {path} is not valid JSON: {e}")


def _platform(args) -> Platform:
    if not args.platform:
        return Platform()
    try:
        return Platform.from_dict(_load_json(args.platform, "platform"))
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"bad platform file {args.platform}: {e}")


def check_feasible(scenario: Scenario) -> list[str]:
    problems = []
    for c, u in enumerate(scenario.core_utilization()):
        if u > 1 + 1e-12:
            problems.append(f"core {c}: periodic utilization {u:.4f} > 1")
    for c in range(scenario.cores):
        tasks = [t for t in scenario.tasks if t.core == c]
        try:
            table = build_table(expand_jobs(tasks, scenario.horizon), scenario.horizon, core=c)
        except TableError as e:
            problems.append(f"core {c}: {e}")
            continue
        if not verify_feasible(table):
            problems.append(f"core {c}: periodic jobs are not EDF-schedulable within the horizon")
    return problems


# subcommands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    d = _load_json(args.spec, "generation spec")
    cases = int(args.cases or d.get("cases", 1))
    try:
        spec = GenSpec.from_dict(d)
    except (TypeError, ValueError) as e:
        if isinstance(e, Unsatisfiable):
            log.error("%s", e)
            return EXIT_INFEASIBLE
        raise UsageError(f"bad generation spec: {e}")
    base = args.seed if args.seed is not None else spec.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(base).generate_state(cases)
    for k, s in enumerate(seeds):
        spec.seed = int(s)
        try:
            sc = generate_taskset(spec)
        except Unsatisfiable as e:
            log.error("case %d: %s", k, e)
            return EXIT_INFEASIBLE
        sc.save(out / f"case_{k:03d}.json")
    print(f"wrote {cases} scenario(s) to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        scenario = Scenario.from_dict(_load_json(args.scenario, "scenario"))
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"bad scenario file {args.scenario}: {e}")
    platform = _platform(args)
    problems = check_feasible(scenario)
    if problems:
        for p in problems:
            log.error("infeasible scenario: %s", p)
        return EXIT_INFEASIBLE
    if args.dump_tables:
        tables = [build_table(expand_jobs([t for t in scenario.tasks if t.core == c], scenario.horizon),
                              scenario.horizon, core=c) for c in range(scenario.cores)]
        Path(args.dump_tables).write_text(dump_tables(tables) + "\n")
    try:
        res = simulate(scenario, platform, args.policy, strict=args.strict, trace_path=args.trace,
                       backend=args.backend)
    except DeadlineMiss as e:
        log.error("aborted: %s", e)
        return EXIT_MISS
    text = json.dumps(res.to_dict(), indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if res.deadline_misses == 0 else EXIT_MISS


def cmd_sweep(args) -> int:
    d = _load_json(args.grid, "grid")
    if args.seed is not None:
        d["seed"] = args.seed
    try:
        grid = ExperimentGrid.from_dict(d)
    except (TypeError, ValueError) as e:
        raise UsageError(f"bad grid file {args.grid}: {e}")
    rows = run_sweep(grid, _platform(args), jobs=args.jobs)
    runs, agg = write_sweep(rows, args.out)
    misses = sum(r.get("deadline_misses") or 0 for r in rows)
    errors = sum(bool(r.get("error")) for r in rows)
    print(f"{len(rows)} runs -> {runs}, {agg}; deadline misses {misses}, failed runs {errors}")
    return EXIT_OK if misses == 0 and errors == 0 else EXIT_MISS


def cmd_compare(args) -> int:
    path = Path(args.results)
    if path.is_dir():
        path = path / "aggregate.csv"
    if not path.exists():
        raise UsageError(f"no aggregate results at {path}")
    try:
        rows = compare(read_csv(path))
    except ValueError as e:
        log.error("%s", e)
        return EXIT_USAGE
    text = dumps_csv(rows, CMP_COLUMNS, "compare")
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# parser --------------------------------------------------------------------

def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommand copies suppress their defaults so flags given before the
    # subcommand are not overwritten
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=d(None), help="base RNG seed (overrides file seeds)")
    g.add_argument("--platform", default=d(None), help="platform/power-model JSON file")
    g.add_argument("--trace", default=d(None), help="write a per-slot CSV trace (run only; slow)")
    g.add_argument("--strict", action="store_true", default=d(False), help="abort on the first deadline miss")
    g.add_argument("--jobs", type=int, default=d(1), help="parallel workers for sweep")
    g.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return g


def build_parser() -> argparse.ArgumentParser:
    g = _global_flags(suppress=True)
    p = argparse.ArgumentParser(prog="slotshift", parents=[_global_flags(suppress=False)],
                                description="Energy-aware slot-shifting simulator.", epilog=SLOT_NOTE)
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("generate", parents=[g], help="generate scenario files from a spec")
    s.add_argument("spec", help="generation spec JSON (GenSpec fields plus 'cases')")
    s.add_argument("out", help="output directory")
    s.add_argument("--cases", type=int, default=None)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("run", parents=[g], help="simulate one scenario", epilog=SLOT_NOTE)
    s.add_argument("scenario")
    s.add_argument("--policy", default="BSS", type=_policy, help="BSS, EASS-DPM or EASS-DVFS")
    s.add_argument("--out", default=None, help="write the result JSON here instead of stdout")
    s.add_argument("--dump-tables", default=None, help="write the initial scheduling tables as JSON")
    s.add_argument("--backend", choices=["kernel", "python"], default=None)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[g], help="run an experiment grid", epilog=SLOT_NOTE)
    s.add_argument("grid", help="grid JSON (ExperimentGrid fields)")
    s.add_argument("out", help="output directory for runs.csv and aggregate.csv")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("compare", parents=[g], help="power reduction vs BSS from sweep results")
    s.add_argument("results", help="sweep output directory or aggregate.csv")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_compare)
    return p


def _policy(s: str) -> Policy:
    try:
        return Policy.parse(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"slotshift: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
