"""Convex quadratic program data model.

A problem is::

    minimize    f(x) = 1/2 x^T H x + c^T x
    subject to  A x >= b

with ``H`` symmetric positive semidefinite. Multipliers ``lam`` belong to the
inequality rows, and the slack is ``s = A x - b``.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .linalg import inf_norm

NORM_FACTOR_FLOOR = 1e-12


class ProblemError(ValueError):
    """Invalid problem data."""


def _frozen(a):
    if a is None:
        return None
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Problem:
    """Dense CQP instance ``min 1/2 x'Hx + c'x  s.t.  Ax >= b``.

    Arrays are copied to read-only float arrays on construction. Nothing is
    validated here so that malformed data can still be inspected with
    :func:`validate`.

    Parameters
    ----------
    H : (n, n) array_like
    A : (m, n) array_like
    b : (m,) array_like
    c : (n,) array_like
    x0 : (n,) array_like, optional
        Strictly feasible starting point (``A @ x0 > b``).
    lambda0 : (m,) array_like, optional
        Positive starting multipliers.
    """

    H: np.ndarray
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    x0: Optional[np.ndarray] = None
    lambda0: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("H", "A", "b", "c", "x0", "lambda0"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[0]

    def replace(self, **changes) -> "Problem":
        fields = dict(H=self.H, A=self.A, b=self.b, c=self.c, x0=self.x0, lambda0=self.lambda0)
        fields.update(changes)
        return Problem(**fields)


@dataclass(frozen=True)
class ScalingInfo:
    """Row scaling ``D = diag(row_scale)`` and the error-metric divisor."""

    row_scale: np.ndarray
    norm_factor: float


class KktResiduals(NamedTuple):
    v: np.ndarray  # dual residual  Hx + c - A'lam
    w: np.ndarray  # min(|s_i|, |lam_i|)


def validate(p: Problem) -> list:
    """Return a list of human-readable violations; empty means ``p`` is usable."""
    out = []
    if p.c.ndim != 1:
        return [f"c must be a vector, got shape {p.c.shape}"]
    if p.b.ndim != 1:
        return [f"b must be a vector, got shape {p.b.shape}"]
    n, m = p.n, p.m
    if m == 0:
        out.append("problem has no constraints (m = 0)")
    if p.H.shape != (n, n):
        out.append(f"H has shape {p.H.shape}, expected ({n}, {n})")
    if p.A.shape != (m, n):
        out.append(f"A has shape {p.A.shape}, expected ({m}, {n})")
    if out:
        return out
    for name in ("H", "A", "b", "c", "x0", "lambda0"):
        arr = getattr(p, name)
        if arr is not None and not np.all(np.isfinite(arr)):
            idx = int(np.flatnonzero(~np.isfinite(arr.ravel()))[0])
            out.append(f"{name} has a non-finite entry at flat index {idx}")
    if not np.array_equal(p.H, p.H.T):
        i, j = np.argwhere(p.H != p.H.T)[0]
        out.append(f"H is not symmetric at ({i}, {j})")
    for i in np.flatnonzero(~np.any(p.A != 0, axis=1)):
        out.append(f"zero constraint row {i}")
    if not (np.any(p.H) or np.any(p.A) or np.any(p.c)):
        out.append("H, A and c are all zero")
    if p.x0 is not None:
        if p.x0.shape != (n,):
            out.append(f"x0 has shape {p.x0.shape}, expected ({n},)")
        else:
            s0 = p.A @ p.x0 - p.b
            bad = np.flatnonzero(~(s0 > 0))
            if bad.size:
                out.append(f"x0 not strictly feasible (constraint {bad[0]} has slack {s0[bad[0]]:.3g})")
    if p.lambda0 is not None:
        if p.lambda0.shape != (m,):
            out.append(f"lambda0 has shape {p.lambda0.shape}, expected ({m},)")
        elif np.any(~(p.lambda0 > 0)):
            out.append(f"lambda0 not positive at index {int(np.flatnonzero(~(p.lambda0 > 0))[0])}")
    return out


def check(p: Problem) -> Problem:
    """Raise :class:`ProblemError` listing every violation, else return `p`."""
    errors = validate(p)
    if errors:
        raise ProblemError("; ".join(errors))
    return p


def norm_factor(p: Problem) -> float:
    return max(inf_norm(p.A), inf_norm(p.H), inf_norm(p.c), NORM_FACTOR_FLOOR)


def row_normalize(p: Problem):
    """Scale every constraint row to unit Euclidean norm.

    Returns the scaled problem and a :class:`ScalingInfo`; the norm factor is
    computed on the scaled data.
    """
    norms = np.linalg.norm(p.A, axis=1)
    if np.any(norms == 0):
        raise ProblemError(f"zero constraint row {int(np.flatnonzero(norms == 0)[0])}")
    scale = 1.0 / norms
    scaled = p.replace(A=p.A * scale[:, None], b=p.b * scale)
    if p.lambda0 is not None:
        # keep D * lam_scaled equal to the caller's multipliers
        scaled = scaled.replace(lambda0=p.lambda0 * norms)
    return scaled, ScalingInfo(_frozen(scale), norm_factor(scaled))


def unscale_multipliers(lam, scaling: ScalingInfo) -> np.ndarray:
    """Map multipliers of the row-scaled problem back to the original rows."""
    return np.asarray(lam) * scaling.row_scale


def objective(p: Problem, x) -> float:
    x = _check_x(p, x)
    return float(0.5 * x @ (p.H @ x) + p.c @ x)


def gradient(p: Problem, x) -> np.ndarray:
    x = _check_x(p, x)
    return p.H @ x + p.c


def slack(p: Problem, x) -> np.ndarray:
    x = _check_x(p, x)
    return p.A @ x - p.b


def _check_x(p, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({p.n},)")
    return x


def kkt_residuals(p: Problem, x, lam) -> KktResiduals:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (p.m,):
        raise ValueError(f"lam has shape {lam.shape}, expected ({p.m},)")
    v = gradient(p, x) - p.A.T @ lam
    w = np.minimum(np.abs(slack(p, x)), np.abs(lam))
    return KktResiduals(v, w)


def error_metric(p: Problem, x, lam, scaling: Optional[ScalingInfo] = None) -> float:
    """KKT error ``||(||v||, ||w||)|| / norm_factor``.

    Zero exactly at primal-dual solutions when ``x`` is feasible and
    ``lam >= 0``. Without `scaling` the divisor is 1.
    """
    v, w = kkt_residuals(p, x, lam)
    e = float(np.hypot(np.linalg.norm(v), np.linalg.norm(w)))
    return e / scaling.norm_factor if scaling is not None else e


def augment_infeasible(p: Problem, phi: float, x=None) -> Problem:
    """l1-penalty reformulation admitting an infeasible primal start.

    Solves over ``(x, z)``::

        minimize    f(x) + phi * sum(z)
        subject to  A x + z >= b,  z >= 0

    The start uses `x` (default ``p.x0``, else zero) and
    ``z_i = max(b_i - a_i'x, 0) + 1`` so both blocks hold strictly.
    """
    if not phi > 0:
        raise ValueError(f"penalty parameter must be positive, got {phi}")
    n, m = p.n, p.m
    if x is None:
        x = p.x0 if p.x0 is not None else np.zeros(n)
    x = _check_x(p, x)
    z = np.maximum(p.b - p.A @ x, 0.0) + 1.0
    H = np.zeros((n + m, n + m))
    H[:n, :n] = p.H
    A = np.block([[p.A, np.eye(m)], [np.zeros((m, n)), np.eye(m)]])
    return Problem(
        H=H,
        A=A,
        b=np.concatenate([p.b, np.zeros(m)]),
        c=np.concatenate([p.c, np.full(m, float(phi))]),
        x0=np.concatenate([x, z]),
    )


def augment_equalities(p: Problem, C, d, phi: float) -> Problem:
    """Append ``C x = d`` through penalized elastic variables ``y``.

    Adds ``C x + y >= d`` and ``-C x + y >= -d`` with cost ``phi * sum(y)``.
    If ``p.x0`` is set, the start uses ``y = |C x0 - d| + 1``.
    """
    if not phi > 0:
        raise ValueError(f"penalty parameter must be positive, got {phi}")
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if C.size == 0:
        return p
    k = C.shape[0]
    if C.shape != (k, p.n) or d.shape != (k,):
        raise ValueError(f"C has shape {C.shape} and d {d.shape}; expected ({k}, {p.n}) and ({k},)")
    n, m = p.n, p.m
    H = np.zeros((n + k, n + k))
    H[:n, :n] = p.H
    A = np.block([
        [p.A, np.zeros((m, k))],
        [C, np.eye(k)],
        [-C, np.eye(k)],
    ])
    x0 = None
    if p.x0 is not None:
        y0 = np.abs(C @ p.x0 - d) + 1.0
        x0 = np.concatenate([p.x0, y0])
    return Problem(
        H=H,
        A=A,
        b=np.concatenate([p.b, d, -d]),
        c=np.concatenate([p.c, np.full(k, float(phi))]),
        x0=x0,
    )
