"""Regularized, constraint-reduced Mehrotra predictor-corrector for dense CQPs.

Each iteration selects a working set ``Q`` of (nearly active) constraints and
builds the normal matrix from those rows only::

    M = H + rho*R + sum_{i in Q} (lam_i / s_i) a_i a_i^T

``rho = min(1, E/E_bar)`` fades the regularization out as the KKT error ``E``
goes to zero. The affine-scaling and corrector directions share one Cholesky
factor of ``M``; the corrector is mixed in with a weight ``gamma`` that keeps
the objective decreasing, so every iterate stays primal strictly feasible.

The public entry point is :func:`solve`. The step functions are exposed for
testing and for building variants.
"""

import enum
import time
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .linalg import CholFactor, FactorizationError, cholesky_factor, cholesky_solve
from .model import Problem, ProblemError, check, objective, row_normalize
from . import rules
from .rules import ProposedRuleState, RuleConfig

SLACK_FLOOR = 1e-14
RHO_SEED = 1e-10


class Status(str, enum.Enum):
    OPTIMAL_LAMBDA = "optimal-lambda"
    OPTIMAL_LAMBDA_TILDE = "optimal-lambda-tilde"
    GRADIENT_ZERO = "gradient-zero"
    ITERATION_LIMIT = "iteration-limit"
    NUMERICAL_FAILURE = "numerical-failure"

    @property
    def optimal(self) -> bool:
        return self in (Status.OPTIMAL_LAMBDA, Status.OPTIMAL_LAMBDA_TILDE, Status.GRADIENT_ZERO)

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SolveOptions:
    """Algorithm parameters.

    Attributes
    ----------
    tol : float
        Stop once ``min(E(x, lam), E(x, [lam_tilde]_+)) < tol``.
    tau : float
        Caps the corrector relative to the affine step, in ``[0, 1)``.
    omega : float
        Fraction of the affine-step objective decrease the combined step
        must retain, in ``(0, 1)``.
    step_fraction : float
        Fraction of the distance to the boundary a step may cover, in
        ``(0, 1)``.
    nu : float
        Exponent (``>= 2``) in the lower bound on the multiplier update.
    lam_max, lam_floor : float
        Multipliers are clipped to ``[min(chi, lam_floor), lam_max]``.
    reg_matrix : ndarray, optional
        PSD matrix ``R`` with ``H + R`` positive definite; identity if None.
    e_bar : float, optional
        Error scale for the regularization; the initial error if None.
    fixed_rho : float, optional
        Use this regularization every iteration instead of ``min(1, E/E_bar)``.
        ``fixed_rho=0`` with the ``all`` rule gives the unreduced,
        unregularized iteration.
    max_iter : int
    rule : RuleConfig
    retry_cap : int
        Maximum number of regularization doublings after a failed Cholesky
        factorization.
    refine_steps : int
        Iterative-refinement passes applied to each Newton direction against
        the reduced Newton system. The normal matrix grows ill-conditioned as
        active slacks vanish even when that system does not; 0 disables.
    """

    tol: float = 1e-8
    tau: float = 0.5
    omega: float = 0.9
    step_fraction: float = 0.98
    nu: float = 3.0
    lam_max: float = 1e30
    lam_floor: float = 1e-6
    reg_matrix: Optional[np.ndarray] = None
    e_bar: Optional[float] = None
    fixed_rho: Optional[float] = None
    max_iter: int = 200
    rule: RuleConfig = field(default_factory=RuleConfig)
    retry_cap: int = 50
    refine_steps: int = 2

    def __post_init__(self):
        if not self.tol >= 0:
            raise ValueError("tol must be nonnegative")
        if not 0 <= self.tau < 1:
            raise ValueError("tau must lie in [0, 1)")
        if not 0 < self.omega < 1:
            raise ValueError("omega must lie in (0, 1)")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must lie in (0, 1)")
        if not self.nu >= 2:
            raise ValueError("nu must be at least 2")
        if not 0 < self.lam_floor < self.lam_max:
            raise ValueError("need 0 < lam_floor < lam_max")
        if self.e_bar is not None and not self.e_bar > 0:
            raise ValueError("e_bar must be positive")
        if self.fixed_rho is not None and not self.fixed_rho >= 0:
            raise ValueError("fixed_rho must be nonnegative")
        if self.max_iter < 0 or self.retry_cap < 1:
            raise ValueError("max_iter must be >= 0 and retry_cap >= 1")
        if self.refine_steps < 0:
            raise ValueError("refine_steps must be nonnegative")


@dataclass(frozen=True)
class Iterate:
    x: np.ndarray
    s: np.ndarray
    lam: np.ndarray
    lam_tilde: np.ndarray
    k: int = 0
    rho: float = 1.0
    rule_state: Optional[ProposedRuleState] = None


@dataclass(frozen=True)
class DirectionBundle:
    """Search-direction pieces of one iteration.

    ``*_lam*`` arrays are indexed by the working set (length ``q``); slack
    directions cover all ``m`` rows.
    """

    dx_aff: np.ndarray
    ds_aff: np.ndarray
    dlam_aff: np.ndarray
    dx_cor: np.ndarray
    ds_cor: np.ndarray
    dlam_cor: np.ndarray
    dx: np.ndarray
    ds: np.ndarray
    dlam: np.ndarray
    alpha_aff: float
    sigma: float
    mu_q: float
    gamma: float


class IterationRecord(NamedTuple):
    k: int
    e: float
    e_tilde: float
    q: int
    alpha_aff: float
    alpha_p: float
    alpha_d: float
    gamma: float
    sigma: float
    mu_q: float
    rho: float
    f: float
    retries: int


@dataclass(frozen=True)
class StepInfo:
    """Everything computed in one iteration, handed to the ``solve`` callback.

    All quantities refer to the row-normalized problem ``problem``.
    """

    problem: Problem
    iterate: Iterate
    working_set: np.ndarray
    grad: np.ndarray
    rho: float
    directions: DirectionBundle
    alpha_p: float
    alpha_d: float
    chi: float
    next_iterate: Iterate


@dataclass
class SolveReport:
    """Outcome of :func:`solve`.

    ``x``, ``lam`` and ``lam_tilde`` refer to the caller's (unscaled)
    constraints. ``final_e`` is ``min(E(x, lam), E(x, [lam_tilde]_+))`` at the
    last iterate, in the normalized units used by the stopping test.
    """

    status: Status
    x: np.ndarray
    lam: np.ndarray
    lam_tilde: np.ndarray
    iterations: int
    trace: List[IterationRecord]
    wall_time: float
    final_e: float
    final_e_lambda: float
    final_e_tilde: float
    f_final: float
    working_set: np.ndarray

    @property
    def multipliers(self) -> np.ndarray:
        """The multiplier estimate declared optimal alongside ``x``."""
        if self.status is Status.GRADIENT_ZERO:
            return np.zeros_like(self.lam)
        if self.status is Status.OPTIMAL_LAMBDA_TILDE:
            return np.maximum(self.lam_tilde, 0.0)
        return self.lam

    @property
    def avg_q(self) -> float:
        if not self.trace:
            return 0.0
        return float(np.mean([t.q for t in self.trace]))


# -- individual steps ---------------------------------------------------------


def regularization(e: float, e_bar: float, H, R):
    """``rho = min(1, e/e_bar)`` and ``W = H + rho*R``."""
    rho = min(1.0, e / e_bar)
    return rho, H + rho * R


def _normal_update(A, s, lam, Q, floor=SLACK_FLOOR):
    """``sum_{i in Q} lam_i / max(s_i, floor) * a_i a_i^T``."""
    n = A.shape[1]
    if len(Q) == 0:
        return np.zeros((n, n))
    AQ = A if len(Q) == A.shape[0] else A[Q]
    d = lam[Q] / np.maximum(s[Q], floor)
    G = AQ.T @ (d[:, None] * AQ)
    # exact symmetry; BLAS may round the two triangles differently
    return np.triu(G) + np.triu(G, 1).T


def form_reduced_normal(W, A, s, lam, Q) -> np.ndarray:
    """Reduced normal matrix ``W + A_Q' diag(lam_Q / max(s_Q, 1e-14)) A_Q``."""
    return W + _normal_update(A, s, lam, Q)


def factor_with_retry(H, R, rho, A, s, lam, Q, retry_cap=50):
    """Factor the reduced normal matrix, doubling ``rho`` on failure.

    A zero ``rho`` is first raised to ``1e-10`` before doubling.

    Returns
    -------
    fac : CholFactor
    rho : float
        Regularization actually used.
    retries : int
        Number of failed attempts.

    Raises
    ------
    FactorizationError
        If the matrix still cannot be factored after `retry_cap` doublings.
    """
    G = _normal_update(A, s, lam, Q)
    base = H + G
    for retries in range(retry_cap + 1):
        try:
            return cholesky_factor(base + rho * R), rho, retries
        except FactorizationError as err:
            last = err
            rho = 2.0 * max(rho, RHO_SEED)
    raise FactorizationError(last.pivot, f"normal matrix not factorable after {retry_cap} doublings")


def affine_direction(fac: CholFactor, grad, A, s, lam, Q):
    """Affine-scaling direction ``(dx, ds, dlam_Q)``.

    Solves ``M dx = -grad``; ``ds = A dx`` on all rows and
    ``dlam_Q = -lam_Q - (lam_Q / s_Q) * ds_Q``. Slacks are floored at 1e-14
    here exactly as in the normal matrix, so the three block equations stay
    consistent when an active slack underflows the floor.
    """
    dx = cholesky_solve(fac, -np.asarray(grad))
    ds = A @ dx
    lamQ = lam[Q]
    dlam = -lamQ - lamQ / np.maximum(s[Q], SLACK_FLOOR) * ds[Q]
    return dx, ds, dlam


def max_step(v, dv) -> float:
    """``sup{alpha >= 0 : v + alpha*dv >= 0}``; ``inf`` when unblocked."""
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def affine_steplength(s, ds_aff, lam_q, dlam_aff_q) -> float:
    return min(1.0, max_step(s, ds_aff), max_step(lam_q, dlam_aff_q))


def reduced_duality_measure(s_q, lam_q) -> float:
    q = len(s_q)
    return float(s_q @ lam_q) / q if q else 0.0


def corrector_direction(fac: CholFactor, A, s, lam, Q, sigma, mu_q, ds_aff_q, dlam_aff_q):
    """Centering/corrector direction ``(dx, ds, dlam_Q)``.

    Right-hand side ``A_Q' S_Q^{-1} (sigma*mu_q - ds_aff_Q * dlam_aff_Q)``;
    zero when ``Q`` is empty.
    """
    n = A.shape[1]
    if len(Q) == 0:
        return np.zeros(n), np.zeros(A.shape[0]), np.zeros(0)
    sQ = np.maximum(s[Q], SLACK_FLOOR)
    target = sigma * mu_q - ds_aff_q * dlam_aff_q
    AQ = A if len(Q) == A.shape[0] else A[Q]
    dx = cholesky_solve(fac, AQ.T @ (target / sQ))
    ds = A @ dx
    dlam = (-lam[Q] * ds[Q] + target) / sQ
    return dx, ds, dlam


def refine_direction(fac: CholFactor, W, A, s, lam, Q, r1, r3, dx, dlam, steps=2):
    """Iterative refinement of a solution of the reduced Newton system.

    The system, with ``ds_Q = A_Q dx`` eliminated, is::

        W dx - A_Q' dlam   = r1
        L_Q A_Q dx + S_Q dlam = r3

    Each pass computes its residual and solves for a correction through the
    normal-matrix factor `fac`. Passes stop early once the residual stops
    shrinking. Returns the refined ``(dx, ds, dlam)`` with ``ds = A dx``.
    """
    if len(Q) == 0 or steps <= 0:
        return dx, A @ dx, dlam
    AQ = A if len(Q) == A.shape[0] else A[Q]
    sQ = np.maximum(s[Q], SLACK_FLOOR)
    lamQ = lam[Q]

    def residual(dx, dlam):
        e1 = r1 - (W @ dx - AQ.T @ dlam)
        e3 = r3 - (lamQ * (AQ @ dx) + sQ * dlam)
        return e1, e3, np.hypot(np.linalg.norm(e1), np.linalg.norm(e3 / sQ))

    e1, e3, size = residual(dx, dlam)
    for _ in range(steps):
        if size == 0:
            break
        ddx = cholesky_solve(fac, e1 + AQ.T @ (e3 / sQ))
        ddl = (e3 - lamQ * (AQ @ ddx)) / sQ
        cand_dx, cand_dl = dx + ddx, dlam + ddl
        n1, n3, cand_size = residual(cand_dx, cand_dl)
        if not cand_size < size:
            break
        dx, dlam, e1, e3, size = cand_dx, cand_dl, n1, n3, cand_size
    return dx, A @ dx, dlam


def descent_mixing_bound(H, grad, dx_aff, dx_cor, omega) -> float:
    """Largest ``g`` in ``[0, 1]`` keeping a fraction `omega` of the affine decrease.

    That is, ``f(x) - f(x + dx_aff + g*dx_cor) >= omega*(f(x) - f(x + dx_aff))``.
    The constraint is a convex quadratic ``psi(g) <= 0`` with ``psi(0) <= 0``;
    its larger root is computed in cancellation-free form.
    """
    aff_decrease = -(grad @ dx_aff) - 0.5 * (dx_aff @ (H @ dx_aff))
    a = dx_cor @ (H @ dx_cor)
    b = (grad + H @ dx_aff) @ dx_cor
    c0 = -(1.0 - omega) * aff_decrease
    if 0.5 * a + b + c0 <= 0:
        return 1.0
    c0 = min(c0, 0.0)
    disc = np.sqrt(max(b * b - 2.0 * a * c0, 0.0))
    if b > 0:
        root = -2.0 * c0 / (b + disc)
    else:
        root = (-b + disc) / a
    return float(min(max(root, 0.0), 1.0))


def mixing_parameter(H, grad, dx_aff, dx_cor, sigma, mu_q, q, tau, omega) -> float:
    """Weight of the corrector in the combined direction."""
    if q == 0:
        return 0.0
    cor_norm = np.linalg.norm(dx_cor)
    if cor_norm == 0:
        return 1.0
    aff_norm = np.linalg.norm(dx_aff)
    caps = [descent_mixing_bound(H, grad, dx_aff, dx_cor, omega), tau * aff_norm / cor_norm]
    if sigma * mu_q > 0:
        caps.append(tau * aff_norm / (sigma * mu_q))
    return float(min(caps))


def step_lengths(s, ds, lam_q, dlam_q, dx_norm, step_fraction):
    """Safeguarded primal and dual step sizes, both in ``(0, 1]``."""

    def safeguard(bar):
        if np.isinf(bar):
            return 1.0
        return min(1.0, max(step_fraction * bar, bar - dx_norm))

    return safeguard(max_step(s, ds)), safeguard(max_step(lam_q, dlam_q))


def update_iterates(problem: Problem, it: Iterate, dirs: DirectionBundle, Q, alpha_p, alpha_d,
                    opts: SolveOptions):
    """Take the step and update multipliers.

    Returns the next :class:`Iterate` (with ``k``, ``rho`` and ``rule_state``
    copied from `it`) and the multiplier lower-bound term ``chi``.
    """
    A, b = problem.A, problem.b
    m = problem.m
    x = it.x + alpha_p * dirs.dx
    s = A @ x - b
    drift = s <= 0
    if np.any(drift):
        s[drift] = (it.s + alpha_p * dirs.ds)[drift]

    lamQ = it.lam[Q]
    chi = (np.linalg.norm(dirs.dx_aff) ** opts.nu
           + np.linalg.norm(np.minimum(lamQ + dirs.dlam_aff, 0.0)) ** opts.nu)
    low = min(chi, opts.lam_floor)

    lam = np.empty(m)
    lam[Q] = np.maximum(np.minimum(lamQ + alpha_d * dirs.dlam, opts.lam_max), low)
    mu_plus = reduced_duality_measure(s[Q], lam[Q])
    out = np.ones(m, dtype=bool)
    out[Q] = False
    lam[out] = np.maximum(np.minimum(mu_plus / s[out], opts.lam_max), low)

    lam_tilde = np.zeros(m)
    lam_tilde[Q] = lamQ + dirs.dlam
    nxt = Iterate(x=x, s=s, lam=lam, lam_tilde=lam_tilde, k=it.k + 1, rho=it.rho,
                  rule_state=it.rule_state)
    return nxt, float(chi)


def check_termination(grad, e_lam, e_tilde, tol) -> Optional[Status]:
    """Status if the iteration should stop, else None."""
    if not np.any(grad):
        return Status.GRADIENT_ZERO
    if min(e_lam, e_tilde) < tol:
        return Status.OPTIMAL_LAMBDA_TILDE if e_lam >= e_tilde else Status.OPTIMAL_LAMBDA
    return None


# -- driver -------------------------------------------------------------------


def solve(problem: Problem, options: Optional[SolveOptions] = None,
          callback: Optional[Callable[[StepInfo], None]] = None) -> SolveReport:
    """Solve ``min 1/2 x'Hx + c'x  s.t.  Ax >= b`` from a strictly feasible start.

    Parameters
    ----------
    problem : Problem
        Must carry a strictly feasible ``x0``. Use
        :func:`crqp.model.augment_infeasible` when none is known.
    options : SolveOptions, optional
    callback : callable, optional
        Called with a :class:`StepInfo` after every completed iteration.

    Returns
    -------
    SolveReport
    """
    t_start = time.perf_counter()
    opts = options or SolveOptions()
    check(problem)
    if problem.x0 is None:
        raise ProblemError("strictly feasible start required (x0 missing)")

    sp, scaling = row_normalize(problem)
    H, A, b, c = sp.H, sp.A, sp.b, sp.c
    n, m = sp.n, sp.m
    nf = scaling.norm_factor
    R = np.eye(n) if opts.reg_matrix is None else np.asarray(opts.reg_matrix, dtype=float)
    if R.shape != (n, n):
        raise ValueError(f"reg_matrix has shape {R.shape}, expected ({n}, {n})")
    cfg = opts.rule

    def error(x, s, lam):
        v = H @ x + c - A.T @ lam
        w = np.minimum(np.abs(s), np.abs(lam))
        return float(np.hypot(np.linalg.norm(v), np.linalg.norm(w))) / nf

    x = sp.x0.copy()
    s = A @ x - b
    lam = sp.lambda0.copy() if sp.lambda0 is not None else np.ones(m)
    it = Iterate(x=x, s=s, lam=lam, lam_tilde=lam.copy())

    e_bar = opts.e_bar
    if e_bar is None:
        e_bar = max(error(x, s, lam), np.finfo(float).tiny)
    delta_bar = None
    if cfg.kind == "proposed":
        delta_bar = cfg.delta_bar if cfg.delta_bar is not None else rules.default_delta_bar(s, n)

    trace = []
    Q = np.zeros(0, dtype=int)
    state = None
    status = None
    while True:
        k = it.k
        grad = H @ it.x + c
        e = error(it.x, it.s, it.lam)
        e_t = error(it.x, it.s, np.maximum(it.lam_tilde, 0.0))
        status = check_termination(grad, e, e_t, opts.tol)
        if status is not None:
            break
        if k >= opts.max_iter:
            status = Status.ITERATION_LIMIT
            break

        # slacks that rounding has pushed below the floor are treated as the floor
        # throughout the step, so ratio tests are not blocked by noise-level slacks
        sw = np.maximum(it.s, SLACK_FLOOR)
        Q, state = rules.select(cfg, k, sw, it.lam, e, n, state, delta_bar)
        q = len(Q)
        rho = opts.fixed_rho if opts.fixed_rho is not None else min(1.0, e / e_bar)
        try:
            fac, rho, retries = factor_with_retry(H, R, rho, A, sw, it.lam, Q, opts.retry_cap)
        except FactorizationError:
            status = Status.NUMERICAL_FAILURE
            break

        lamQ = it.lam[Q]
        W = H + rho * R if rho else H
        dx_a, ds_a, dl_a = affine_direction(fac, grad, A, sw, it.lam, Q)
        dx_a, ds_a, dl_a = refine_direction(fac, W, A, sw, it.lam, Q, -grad + A[Q].T @ lamQ,
                                            -sw[Q] * lamQ, dx_a, dl_a, opts.refine_steps)
        alpha_aff = affine_steplength(sw, ds_a, lamQ, dl_a)
        mu_q = reduced_duality_measure(sw[Q], lamQ)
        sigma = (1.0 - alpha_aff) ** 3
        dx_c, ds_c, dl_c = corrector_direction(fac, A, sw, it.lam, Q, sigma, mu_q, ds_a[Q], dl_a)
        dx_c, ds_c, dl_c = refine_direction(fac, W, A, sw, it.lam, Q, np.zeros(n),
                                            sigma * mu_q - ds_a[Q] * dl_a, dx_c, dl_c, opts.refine_steps)
        gamma = mixing_parameter(H, grad, dx_a, dx_c, sigma, mu_q, q, opts.tau, opts.omega)
        dirs = DirectionBundle(
            dx_aff=dx_a, ds_aff=ds_a, dlam_aff=dl_a,
            dx_cor=dx_c, ds_cor=ds_c, dlam_cor=dl_c,
            dx=dx_a + gamma * dx_c, ds=ds_a + gamma * ds_c, dlam=dl_a + gamma * dl_c,
            alpha_aff=alpha_aff, sigma=sigma, mu_q=mu_q, gamma=gamma,
        )
        alpha_p, alpha_d = step_lengths(sw, dirs.ds, lamQ, dirs.dlam, np.linalg.norm(dirs.dx),
                                        opts.step_fraction)
        cur = Iterate(x=it.x, s=sw, lam=it.lam, lam_tilde=it.lam_tilde, k=k, rho=rho,
                      rule_state=state)
        nxt, chi = update_iterates(sp, cur, dirs, Q, alpha_p, alpha_d, opts)
        trace.append(IterationRecord(
            k=k, e=e, e_tilde=e_t, q=q, alpha_aff=alpha_aff, alpha_p=alpha_p, alpha_d=alpha_d,
            gamma=gamma, sigma=sigma, mu_q=mu_q, rho=rho, f=objective(sp, it.x), retries=retries,
        ))
        if callback is not None:
            callback(StepInfo(problem=sp, iterate=cur, working_set=Q, grad=grad, rho=rho,
                              directions=dirs, alpha_p=alpha_p, alpha_d=alpha_d, chi=chi,
                              next_iterate=nxt))
        it = nxt

    return SolveReport(
        status=status,
        x=it.x.copy(),
        lam=it.lam * scaling.row_scale,
        lam_tilde=it.lam_tilde * scaling.row_scale,
        iterations=len(trace),
        trace=trace,
        wall_time=time.perf_counter() - t_start,
        final_e=min(e, e_t),
        final_e_lambda=e,
        final_e_tilde=e_t,
        f_final=objective(sp, it.x),
        working_set=Q,
    )
