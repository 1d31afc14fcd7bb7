"""Reproducible test-problem families.

Random draws use numpy's PCG64 generator. A spec's seed feeds a
``SeedSequence`` which is spawned into one child stream per generated array,
in a fixed order, so adding or resizing one array never shifts the others'
draws.
"""

import math
from dataclasses import dataclass

import numpy as np

from .model import Problem

H_KINDS = ("diagonal-positive", "zero", "rank-deficient")
TARGETS = {
    "g1": lambda t: np.sin(10 * t) * np.cos(25 * t ** 2),
    "g2": lambda t: np.sin(5 * t ** 3) * np.cos(10 * t) ** 2,
}


def _streams(seed, count):
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


@dataclass(frozen=True)
class RandomSpec:
    n: int
    m: int
    h_kind: str = "diagonal-positive"
    seed: int = 0

    def __post_init__(self):
        if self.n <= 0 or self.m <= 0:
            raise ValueError(f"n and m must be positive, got n={self.n}, m={self.m}")
        if self.h_kind not in H_KINDS:
            raise ValueError(f"unknown h_kind {self.h_kind!r}; expected one of {H_KINDS}")


@dataclass(frozen=True)
class DataFitSpec:
    target: str = "g1"
    nbar: int = 19
    mbar: int = 250
    noise_var: float = 0.09
    alpha: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}; expected one of {sorted(TARGETS)}")
        if self.nbar < 2 or self.mbar < 1:
            raise ValueError(f"need nbar >= 2 and mbar >= 1, got {self.nbar}, {self.mbar}")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")


def gen_random(spec: RandomSpec) -> Problem:
    """Random imbalanced CQP with a known strictly feasible point.

    ``A``, ``c`` ~ N(0, 1); ``x0`` ~ U(0, 1); ``s0`` ~ U(1, 2); ``b = A x0 - s0``.
    ``H`` is ``diag(U(0, 1))``, zero, or that diagonal with entries
    0, 2, 4, ... zeroed.
    """
    n, m = spec.n, spec.m
    rA, rc, rx, rs, rh = _streams(spec.seed, 5)
    A = rA.standard_normal((m, n))
    c = rc.standard_normal(n)
    x0 = rx.uniform(0.0, 1.0, n)
    s0 = rs.uniform(1.0, 2.0, m)
    h = rh.uniform(0.0, 1.0, n)
    if spec.h_kind == "zero":
        h[:] = 0.0
    elif spec.h_kind == "rank-deficient":
        h[::2] = 0.0
    return Problem(H=np.diag(h), A=A, b=A @ x0 - s0, c=c, x0=x0)


def trig_basis(t, nbar: int) -> np.ndarray:
    """Matrix ``[psi_j(t_i)]``: ``ceil(nbar/2)`` cosines then sines."""
    t = np.asarray(t, dtype=float)
    half = math.ceil(nbar / 2)
    j = np.arange(1, nbar + 1)
    freq = np.where(j <= half, j - 1, j - half)
    arg = 2 * np.pi * np.outer(t, freq)
    return np.where(j <= half, np.cos(arg), np.sin(arg))


def smoothing_weights(nbar: int) -> np.ndarray:
    """Diagonal of the roughness penalty: each basis function's angular frequency."""
    half = math.ceil(nbar / 2)
    h = np.zeros(nbar)
    for j in range(2, half + 1):
        h[j - 1] = 2 * (j - 1) * np.pi
        if j + half - 1 <= nbar:
            h[j + half - 2] = 2 * (j - 1) * np.pi
    h[nbar - 1] = 2 * (nbar // 2) * np.pi
    return h


def gen_datafit(spec: DataFitSpec) -> Problem:
    """Regularized minimax trigonometric fit as a CQP over ``(xbar, v)``.

    minimize ``v + alpha/2 xbar' diag(h) xbar`` subject to
    ``|Abar xbar - bbar| <= v`` written as two blocks of ``mbar`` rows.
    The start ``xbar = 0``, ``v = max|bbar| + 1`` has every slack ``>= 1``.
    """
    nbar, mbar = spec.nbar, spec.mbar
    (rnoise,) = _streams(spec.seed, 1)
    t = np.arange(mbar) / mbar
    bbar = TARGETS[spec.target](t) + rnoise.normal(0.0, math.sqrt(spec.noise_var), mbar)
    Abar = trig_basis(t, nbar)
    n = nbar + 1
    H = np.zeros((n, n))
    H[:nbar, :nbar] = np.diag(spec.alpha * smoothing_weights(nbar))
    c = np.zeros(n)
    c[-1] = 1.0
    ones = np.ones((mbar, 1))
    A = np.block([[Abar, ones], [-Abar, ones]])
    b = np.concatenate([bbar, -bbar])
    x0 = np.zeros(n)
    x0[-1] = np.max(np.abs(bbar)) + 1.0
    return Problem(H=H, A=A, b=b, c=c, x0=x0)


FAMILIES = ("random-pd", "random-lp", "random-rankdef", "datafit-g1", "datafit-g2")
_RANDOM_KINDS = {"random-pd": "diagonal-positive", "random-lp": "zero", "random-rankdef": "rank-deficient"}


def make_problem(family: str, n: int, m: int, seed: int) -> Problem:
    """Instance of a named family with ``n`` variables and ``m`` constraints.

    Data-fit families take ``nbar = n - 1`` basis functions and
    ``mbar = m / 2`` sample points, so ``m`` must be even.
    """
    if family in _RANDOM_KINDS:
        return gen_random(RandomSpec(n=n, m=m, h_kind=_RANDOM_KINDS[family], seed=seed))
    if family in ("datafit-g1", "datafit-g2"):
        if m % 2:
            raise ValueError(f"data-fit families need an even m, got {m}")
        return gen_datafit(DataFitSpec(target=family[-2:], nbar=n - 1, mbar=m // 2, seed=seed))
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
