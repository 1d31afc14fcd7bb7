"""Start from a point that violates the constraints, via the l1 penalty.

The solver needs a strictly feasible primal start. When none is at hand,
``augment_infeasible`` adds one slack-like variable per constraint with a
linear penalty; for a large enough penalty the extra variables vanish at
the solution and the original block solves the original problem.

Run with ``python3 demos/infeasible_start.py``.
"""

import numpy as np

from crqp import SolveOptions, augment_infeasible, make_problem, solve

p = make_problem("random-pd", 10, 300, seed=7)
bad = p.x0 + 50.0  # far outside the feasible region
print(f"rows violated at the start: {np.sum(p.A @ bad - p.b <= 0)} of {p.m}")

for phi in (1e-2, 1e3):
    aug = augment_infeasible(p, phi, x=bad)
    rep = solve(aug, SolveOptions())
    x, z = rep.x[:p.n], rep.x[p.n:]
    print(f"phi = {phi:g}: {rep.status}, {rep.iterations} iterations, |z| = {np.linalg.norm(z):.2e}, "
          f"min slack {np.min(p.A @ x - p.b):+.2e}")

ref = solve(p)
print(f"distance to the feasible-start solution: {np.linalg.norm(x - ref.x):.2e}")
