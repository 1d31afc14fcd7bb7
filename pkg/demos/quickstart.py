"""Solve a small QP, inspect the iteration trace and the multipliers.

Run with ``python3 demos/quickstart.py``.
"""

import numpy as np

from crqp import Problem, RuleConfig, SolveOptions, solve

# project the point (2, 0.5) onto the triangle x >= 0, y >= 0, x + y <= 1
p = Problem(
    H=2 * np.eye(2),
    c=np.array([-4.0, -1.0]),
    A=np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]),
    b=np.array([0.0, 0.0, -1.0]),
    x0=np.array([0.25, 0.25]),
)

rep = solve(p, SolveOptions(rule=RuleConfig(kind="all")))
print(f"status {rep.status} after {rep.iterations} iterations, E = {rep.final_e:.1e}")
print("x      ", np.round(rep.x, 8))
print("lambda ", np.round(rep.lam, 8))

print("\n  k        E      |Q|  alpha_p  alpha_d    gamma")
for t in rep.trace:
    print(f"{t.k:3d}  {t.e:9.2e}  {t.q:3d}  {t.alpha_p:7.4f}  {t.alpha_d:7.4f}  {t.gamma:7.4f}")

# the projection is (1, 0) with multipliers (0, 1, 2)
assert np.allclose(rep.x, [1.0, 0.0], atol=1e-7)
assert np.allclose(rep.lam, [0.0, 1.0, 2.0], atol=1e-6)
