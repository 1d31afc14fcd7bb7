import numpy as np
import pytest

from crqp import Problem

# lines collected by the acceptance suite, echoed once at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def tiny_instance(rng, n=None, m=None, strongly_convex=True):
    """Random small CQP with a strictly feasible x0 and a bounded solution."""
    n = n or int(rng.integers(1, 5))
    m = m or int(rng.integers(n + 1, 9))
    A = rng.standard_normal((m, n))
    x0 = rng.uniform(-1, 1, n)
    b = A @ x0 - rng.uniform(0.1, 1.0, m)
    G = rng.standard_normal((n, n))
    H = G @ G.T + 0.5 * np.eye(n) if strongly_convex else np.zeros((n, n))
    c = rng.standard_normal(n) * 3
    return Problem(H=H, A=A, b=b, c=c, x0=x0)


@pytest.fixture
def hand_interior():
    """min x^2 - 2x s.t. x >= 0; solution x = 1 with the constraint inactive."""
    return Problem(H=[[2.0]], A=[[1.0]], b=[0.0], c=[-2.0], x0=[0.5])


@pytest.fixture
def hand_active():
    """min x^2 + 2x s.t. x >= 0; solution x = 0 with multiplier 2."""
    return Problem(H=[[2.0]], A=[[1.0]], b=[0.0], c=[2.0], x0=[0.5])
