"""Compare the four working-set rules on one random instance.

A constraint-reduced iteration only factors the rows it selects, so the
per-iteration cost drops with the working-set size while the iteration
count stays close to the unreduced method.

Run with ``python3 demos/compare_rules.py [n] [m]``.
"""

import sys
import time

from crqp import RuleConfig, SolveOptions, make_problem, solve

n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
m = int(sys.argv[2]) if len(sys.argv) > 2 else 4000
p = make_problem("random-pd", n, m, seed=1)
print(f"random-pd instance, n = {n}, m = {m}\n")
print(f"{'rule':10s} {'iters':>5s} {'avg |Q|':>9s} {'|Q|/m':>7s} {'time ms':>9s} {'f':>20s}")

for rule in ("all", "proposed", "jot", "ffk"):
    t0 = time.perf_counter()
    rep = solve(p, SolveOptions(rule=RuleConfig(kind=rule)))
    ms = (time.perf_counter() - t0) * 1e3
    print(f"{rule:10s} {rep.iterations:5d} {rep.avg_q:9.1f} {rep.avg_q / m:7.3f} {ms:9.1f} {rep.f_final:20.12g}")
