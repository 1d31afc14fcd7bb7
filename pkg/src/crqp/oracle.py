"""Brute-force KKT solver for tiny problems.

Enumerates candidate active sets, solves the equality-constrained KKT system
for each, and keeps the primal-feasible, dual-feasible points. Cost grows as
``2**m``; meant for cross-checking the interior-point solver on ``m <= ~12``.
"""

import itertools
from typing import NamedTuple

import numpy as np

from .model import Problem


class OracleSolution(NamedTuple):
    x: np.ndarray
    lam: np.ndarray
    active: tuple
    f: float


def kkt_enumerate(p: Problem, tol=1e-9, max_active=None) -> OracleSolution:
    """Return the lowest-objective KKT point found by active-set enumeration.

    For each subset ``S`` of constraints (by increasing size, at most
    `max_active`, default ``n``) solve::

        [ H    -A_S' ] [x    ]   [-c ]
        [ A_S   0    ] [lam_S] = [b_S]

    Subsets with a singular KKT matrix are skipped. A candidate is kept if
    ``A x >= b - tol`` and ``lam_S >= -tol``.

    Raises
    ------
    ValueError
        If no KKT point exists among the enumerated subsets (infeasible or
        unbounded problem, or a degenerate solution needing more than
        `max_active` active rows).
    """
    H, A, b, c = p.H, p.A, p.b, p.c
    n, m = p.n, p.m
    kmax = n if max_active is None else max_active
    scale = max(1.0, np.max(np.abs(A)), np.max(np.abs(b)))
    best = None
    for size in range(0, min(kmax, m) + 1):
        for S in itertools.combinations(range(m), size):
            S = list(S)
            AS = A[S]
            K = np.block([[H, -AS.T], [AS, np.zeros((size, size))]])
            if np.linalg.matrix_rank(K) < n + size:
                continue
            sol = np.linalg.solve(K, np.concatenate([-c, b[S]]))
            x, lamS = sol[:n], sol[n:]
            if np.any(A @ x - b < -tol * scale) or np.any(lamS < -tol * scale):
                continue
            f = float(0.5 * x @ H @ x + c @ x)
            if best is None or f < best.f - 1e-12 * max(1.0, abs(f)):
                lam = np.zeros(m)
                lam[S] = np.maximum(lamS, 0.0)
                best = OracleSolution(x, lam, tuple(S), f)
    if best is None:
        raise ValueError("no KKT point found by enumeration")
    return best
