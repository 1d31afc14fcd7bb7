"""Working-set selection rules.

Every rule maps the current slacks (and, depending on the rule, the KKT error
or the duality measure) to a sorted array of constraint indices ``Q``. The
reduced normal matrix is then built from those rows only.

``proposed``
    Slack threshold ``delta_k`` that shrinks by ``theta`` each time the error
    drops below ``beta`` times the best error seen so far.
``jot``
    Keep at least ``q = min(max(n, ceil(mu**kappa * m)), q_upper)`` of the
    smallest slacks.
``ffk``
    Slack threshold ``E_k**r``.
``all``
    No reduction.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

RULE_KINDS = ("proposed", "jot", "ffk", "all")


@dataclass(frozen=True)
class RuleConfig:
    kind: str = "proposed"
    beta: float = 0.4
    theta: float = 0.5
    delta_bar: Optional[float] = None  # None: 2n-th smallest initial slack
    kappa: float = 0.25
    q_upper: Optional[int] = None  # None: m
    r: float = 0.5

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule {self.kind!r}; expected one of {RULE_KINDS}")
        if not 0 < self.beta < self.theta < 1:
            raise ValueError(f"need 0 < beta < theta < 1, got beta={self.beta}, theta={self.theta}")
        if self.delta_bar is not None and not self.delta_bar > 0:
            raise ValueError(f"delta_bar must be positive, got {self.delta_bar}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not 0 < self.r < 1:
            raise ValueError(f"r must lie in (0, 1), got {self.r}")


class ProposedRuleState(NamedTuple):
    delta: float
    e_min: float


def default_delta_bar(s0, n: int) -> float:
    """The ``2n``-th smallest initial slack (the ``m``-th if ``m < 2n``)."""
    s0 = np.asarray(s0, dtype=float)
    k = min(2 * n, s0.size)
    return float(np.partition(s0, k - 1)[k - 1])


def select_proposed(k: int, s, e_k: float, state: Optional[ProposedRuleState], cfg: RuleConfig,
                    delta_bar: Optional[float] = None):
    """Threshold rule driven by the decrease of the KKT error.

    Parameters
    ----------
    k : int
        Iteration index; at ``k == 0`` `state` is ignored.
    s : (m,) ndarray
        Current slacks.
    e_k : float
        Current error ``E(x_k, lam_k)``.
    state : ProposedRuleState or None
        Threshold and best error carried over from iteration ``k - 1``.
    cfg : RuleConfig
    delta_bar : float, optional
        Initial threshold; overrides ``cfg.delta_bar``.

    Returns
    -------
    Q : ndarray of int
    state : ProposedRuleState
    """
    s = np.asarray(s, dtype=float)
    if k == 0:
        d0 = delta_bar if delta_bar is not None else cfg.delta_bar
        if d0 is None:
            raise ValueError("initial threshold delta_bar is required at k = 0")
        state = ProposedRuleState(float(d0), float(e_k))
    elif e_k <= cfg.beta * state.e_min:
        state = ProposedRuleState(cfg.theta * state.delta, float(e_k))
    Q = np.flatnonzero(s <= state.delta)
    return Q, state


def jot_size(mu: float, n: int, m: int, cfg: RuleConfig) -> int:
    q_upper = m if cfg.q_upper is None else cfg.q_upper
    q = min(max(n, math.ceil(mu ** cfg.kappa * m)), q_upper)
    return max(1, min(q, m))


def select_jot(s, mu: float, n: int, cfg: RuleConfig) -> np.ndarray:
    """Every constraint whose slack is at most the ``q``-th smallest slack.

    Ties at the cutoff are all kept, so ``len(Q)`` may exceed ``q``.
    """
    s = np.asarray(s, dtype=float)
    q = jot_size(mu, n, s.size, cfg)
    eta = np.partition(s, q - 1)[q - 1]
    return np.flatnonzero(s <= eta)


def select_ffk(s, e_k: float, cfg: RuleConfig) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.flatnonzero(s <= e_k ** cfg.r)


def select_all(m: int) -> np.ndarray:
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}")
    return np.arange(m)


def select(cfg: RuleConfig, k: int, s, lam, e_k: float, n: int,
           state: Optional[ProposedRuleState] = None, delta_bar: Optional[float] = None):
    """Dispatch to the configured rule; returns ``(Q, state)``.

    `state` is only threaded through for the proposed rule and is returned
    unchanged (``None``) by the others.
    """
    if cfg.kind == "proposed":
        return select_proposed(k, s, e_k, state, cfg, delta_bar=delta_bar)
    if cfg.kind == "jot":
        s = np.asarray(s, dtype=float)
        mu = float(s @ np.asarray(lam, dtype=float)) / s.size
        return select_jot(s, mu, n, cfg), state
    if cfg.kind == "ffk":
        return select_ffk(s, e_k, cfg), state
    return select_all(len(s)), state
