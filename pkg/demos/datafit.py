"""Minimax trigonometric fit of noisy samples, solved as a CQP.

The fit minimizes the largest residual ``v`` (plus a tiny smoothing term),
so only the samples that touch the error band are active at the solution.
The proposed rule finds and keeps roughly those rows.

Run with ``python3 demos/datafit.py``; pass ``--plot`` to draw the fit
(requires matplotlib).
"""

import sys

import numpy as np

from crqp import DataFitSpec, RuleConfig, SolveOptions, gen_datafit, solve
from crqp.generators import trig_basis

spec = DataFitSpec(target="g1", nbar=15, mbar=600, seed=3)
p = gen_datafit(spec)
rep = solve(p, SolveOptions(rule=RuleConfig(kind="proposed")))

coef, v = rep.x[:-1], rep.x[-1]
t = np.arange(spec.mbar) / spec.mbar
fit = trig_basis(t, spec.nbar) @ coef
samples = p.b[:spec.mbar]
resid = np.abs(fit - samples)

print(f"status {rep.status}, {rep.iterations} iterations, avg |Q| = {rep.avg_q:.1f} of {p.m}")
print(f"max residual {resid.max():.6f}, band half-width v = {v:.6f}")
print(f"samples on the band: {np.sum(resid >= v - 1e-6)}; final working set size {len(rep.working_set)}")

if "--plot" in sys.argv:
    import matplotlib.pyplot as plt

    plt.plot(t, samples, ".", ms=2, label="samples")
    plt.plot(t, fit, label="minimax fit")
    plt.fill_between(t, fit - v, fit + v, alpha=0.2, label="error band")
    plt.legend()
    plt.show()
