"""Command-line driver: ``crqp generate | solve | bench``.

Exit codes: 0 on success, 2 for bad flags or unusable input, 3 when
``solve`` ends in a numerical failure.
"""

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .generators import FAMILIES, DataFitSpec, gen_datafit, make_problem
from .model import ProblemError, augment_infeasible, validate
from .problem_io import ProblemFormatError, ResultRow, load_problem, save_problem, write_csv
from .rules import RULE_KINDS, RuleConfig
from .solver import SolveOptions, Status, solve

EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class CliError(Exception):
    """Reported on stderr with exit code 2."""


def _add_solver_flags(p):
    g = p.add_argument_group("solver options")
    g.add_argument("--tol", type=float, default=1e-8, help="stopping tolerance on E (default: %(default)g)")
    g.add_argument("--max-iter", type=int, default=200, help="iteration cap (default: %(default)d)")
    g.add_argument("--tau", type=float, default=0.5)
    g.add_argument("--omega", type=float, default=0.9)
    g.add_argument("--step-fraction", type=float, default=0.98)


def _options(args, rule: str) -> SolveOptions:
    try:
        return SolveOptions(tol=args.tol, max_iter=args.max_iter, tau=args.tau, omega=args.omega,
                            step_fraction=args.step_fraction, rule=RuleConfig(kind=rule))
    except ValueError as exc:
        raise CliError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crqp", description="Constraint-reduced predictor-corrector solver for dense convex QPs.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a generated problem to a file")
    g.add_argument("--family", choices=FAMILIES, default="random-pd")
    g.add_argument("--n", type=int, default=20, help="variables (random families)")
    g.add_argument("--m", type=int, default=500, help="constraints (random families)")
    g.add_argument("--nbar", type=int, default=19, help="basis functions (data-fit families)")
    g.add_argument("--mbar", type=int, default=250, help="sample points (data-fit families)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True, type=Path)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one problem file")
    s.add_argument("problem", type=Path)
    s.add_argument("--rule", choices=RULE_KINDS, default="proposed")
    s.add_argument("--penalty", type=float, metavar="PHI",
                   help="solve the l1-penalty reformulation, allowing an infeasible or missing x0")
    s.add_argument("--trace", type=Path, help="write per-iteration records to this CSV file")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run rules x sizes x seeds and write CSV summaries")
    b.add_argument("--family", choices=FAMILIES, default="random-pd")
    b.add_argument("--m", type=int, default=2000)
    b.add_argument("--n", type=int, nargs="+", default=[20, 50], dest="n_list")
    b.add_argument("--seeds", type=int, default=10, help="seeds 0..SEEDS-1 (default: %(default)d)")
    b.add_argument("--rules", nargs="+", choices=RULE_KINDS, default=list(RULE_KINDS))
    b.add_argument("--output", type=Path, required=True, help="raw CSV, one row per (instance, rule)")
    b.add_argument("--aggregate", type=Path, help="means per (family, n, rule); default <output>_agg.csv")
    b.add_argument("--save-problems", type=Path, metavar="DIR", help="also write every instance here")
    b.add_argument("--jobs", type=int, help="parallel workers (default: $CRQP_THREADS or all cores)")
    _add_solver_flags(b)
    b.set_defaults(func=cmd_bench)
    return parser


# -- generate -----------------------------------------------------------------


def cmd_generate(args) -> int:
    try:
        if args.family.startswith("datafit"):
            spec = DataFitSpec(target=args.family[-2:], nbar=args.nbar, mbar=args.mbar, seed=args.seed)
            p = gen_datafit(spec)
            prov = f"family={args.family} nbar={args.nbar} mbar={args.mbar} seed={args.seed}"
        else:
            p = make_problem(args.family, args.n, args.m, args.seed)
            prov = f"family={args.family} n={args.n} m={args.m} seed={args.seed}"
    except ValueError as exc:
        raise CliError(str(exc)) from None
    save_problem(args.output, p, comment=prov)
    print(f"wrote {args.output} (n={p.n}, m={p.m})")
    return 0


# -- solve --------------------------------------------------------------------


def _load(path):
    try:
        return load_problem(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    except ProblemFormatError as exc:
        raise CliError(f"{path}: {exc}") from None


def cmd_solve(args) -> int:
    p = _load(args.problem)
    start_problems = [e for e in validate(p) if e.startswith("x0")]
    if p.x0 is None:
        start_problems.append("x0 missing")
    other = [e for e in validate(p) if not e.startswith("x0")]
    if other:
        raise CliError("; ".join(other))

    n = p.n
    target = p
    if args.penalty is not None:
        try:
            target = augment_infeasible(p, args.penalty, x=p.x0 if p.x0 is not None else np.zeros(n))
        except ValueError as exc:
            raise CliError(str(exc)) from None
    elif start_problems:
        raise CliError("strictly feasible start required (" + "; ".join(start_problems)
                       + "); pass --penalty PHI to solve from an infeasible start")

    try:
        rep = solve(target, _options(args, args.rule))
    except ProblemError as exc:
        raise CliError(str(exc)) from None

    x = rep.x[:n]
    print(f"status      {rep.status}")
    print(f"iterations  {rep.iterations}")
    print(f"f           {0.5 * x @ p.H @ x + p.c @ x:.12g}")
    print(f"E           {rep.final_e:.3e}")
    print(f"avg |Q|     {rep.avg_q:.2f} of {target.m}")
    print(f"time        {rep.wall_time * 1e3:.2f} ms")
    if args.penalty is not None:
        print(f"|z|         {np.linalg.norm(rep.x[n:]):.3e}")
    print("x           " + " ".join(f"{v:.10g}" for v in x))

    if args.trace is not None:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(rep.trace[0]._fields if rep.trace else ())
            for rec in rep.trace:
                w.writerow(["%.17g" % v if isinstance(v, float) else v for v in rec])
    return EXIT_NUMERICAL if rep.status is Status.NUMERICAL_FAILURE else 0


# -- bench --------------------------------------------------------------------


def problem_id(family, n, m, seed) -> str:
    return f"{family}-n{n}-m{m}-s{seed}"


def _bench_instance(task):
    family, n, m, seed, rules, base, save_dir = task
    p = make_problem(family, n, m, seed)
    pid = problem_id(family, n, m, seed)
    if save_dir is not None:
        save_problem(Path(save_dir) / f"{pid}.crqp", p, comment=f"family={family} n={n} m={m} seed={seed}")
    rows = []
    for rule in rules:
        opts = replace(base, rule=RuleConfig(kind=rule))
        t0 = time.perf_counter()
        rep = solve(p, opts)
        elapsed = time.perf_counter() - t0
        rows.append(ResultRow(
            problem_id=pid, rule=rule, n=n, m=m, seed=seed, iterations=rep.iterations,
            avg_q=rep.avg_q, time_ms=elapsed * 1e3, final_e=rep.final_e,
            status=str(rep.status), f_final=rep.f_final,
        ))
    return rows


def worker_count(requested=None) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("CRQP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"CRQP_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_bench(family, m, n_list, seeds, rules, options=None, save_dir=None, jobs=1) -> list:
    """Solve every (n, seed) instance with every rule; rows in (n, seed, rule) order."""
    base = options or SolveOptions()
    tasks = [(family, n, m, seed, tuple(rules), base, save_dir) for n in n_list for seed in range(seeds)]
    if jobs <= 1 or len(tasks) <= 1:
        batches = [_bench_instance(t) for t in tasks]
    else:
        # one BLAS thread per worker keeps each solve single-threaded
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks)), initializer=threadpool_limits,
                                 initargs=(1,)) as pool:
            batches = list(pool.map(_bench_instance, tasks))
    return [row for batch in batches for row in batch]


AGG_HEADER = ("family", "n", "m", "rule", "runs", "solved", "iterations", "avg_q", "time_ms")


def aggregate_csv(rows, family) -> str:
    groups = {}
    for r in rows:
        groups.setdefault((r.n, r.m, r.rule), []).append(r)
    lines = [",".join(AGG_HEADER)]
    for (n, m, rule), rs in groups.items():
        solved = sum(r.status.startswith("optimal") or r.status == "gradient-zero" for r in rs)
        lines.append(",".join([
            family, str(n), str(m), rule, str(len(rs)), str(solved),
            f"{np.mean([r.iterations for r in rs]):.2f}",
            f"{np.mean([r.avg_q for r in rs]):.2f}",
            f"{np.mean([r.time_ms for r in rs]):.3f}",
        ]))
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    if not args.n_list or args.seeds < 1:
        raise CliError("need at least one --n value and --seeds >= 1")
    if args.m < 1 or any(n < 1 for n in args.n_list):
        raise CliError("--m and --n values must be positive")
    opts = _options(args, "proposed")
    if args.save_problems is not None:
        args.save_problems.mkdir(parents=True, exist_ok=True)
    try:
        rows = run_bench(args.family, args.m, args.n_list, args.seeds, args.rules, opts,
                         save_dir=args.save_problems, jobs=worker_count(args.jobs))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    agg_path = args.aggregate or args.output.with_name(args.output.stem + "_agg.csv")
    args.output.write_text(write_csv(rows))
    agg_path.write_text(aggregate_csv(rows, args.family))
    print(f"{len(rows)} solves written to {args.output}; means in {agg_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"crqp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
