import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from crqp.model import (Problem, ProblemError, augment_equalities, augment_infeasible, check,
                        error_metric, gradient, kkt_residuals, norm_factor, objective,
                        row_normalize, slack, unscale_multipliers, validate)
from crqp.oracle import kkt_enumerate

from conftest import tiny_instance


def small_problem(**kw):
    base = dict(H=np.eye(2), A=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], b=[0.0, 0.0, -1.0],
                c=[1.0, -1.0], x0=[1.0, 1.0])
    base.update(kw)
    return Problem(**base)


def test_problem_arrays_are_readonly_copies():
    A = np.array([[1.0, 2.0]])
    p = Problem(H=np.eye(2), A=A, b=[0.0], c=[0.0, 1.0])
    A[0, 0] = 9.0
    assert p.A[0, 0] == 1.0
    with pytest.raises(ValueError):
        p.A[0, 0] = 3.0
    assert (p.n, p.m) == (2, 1)


def test_validate_ok():
    assert validate(small_problem()) == []
    assert check(small_problem()) is not None


def test_validate_zero_row():
    errs = validate(small_problem(A=[[1.0, 0.0], [0.0, 0.0], [1.0, 1.0]]))
    assert any("zero constraint row 1" in e for e in errs)


def test_validate_boundary_start():
    errs = validate(small_problem(x0=[0.0, 1.0]))
    assert any(e.startswith("x0 not strictly feasible") for e in errs)
    with pytest.raises(ProblemError, match="x0 not strictly feasible"):
        check(small_problem(x0=[0.0, 1.0]))


def test_validate_shapes_symmetry_finiteness():
    assert any("H has shape" in e for e in validate(small_problem(H=np.eye(3))))
    assert any("not symmetric" in e for e in validate(small_problem(H=[[1.0, 1.0], [0.0, 1.0]])))
    assert any("non-finite" in e for e in validate(small_problem(c=[np.inf, 0.0])))
    assert any("lambda0 not positive" in e for e in validate(small_problem(lambda0=[1.0, 0.0, 1.0])))
    assert any("all zero" in e for e in validate(
        Problem(H=np.zeros((1, 1)), A=[[0.0]], b=[0.0], c=[0.0])))


def test_row_normalize_examples():
    p = Problem(H=[[1.0, 0.0], [0.0, 1.0]], A=[[3.0, 4.0]], b=[10.0], c=[0.0, 0.0], x0=[5.0, 5.0])
    sp, info = row_normalize(p)
    assert_allclose(sp.A, [[0.6, 0.8]], rtol=1e-15)
    assert_allclose(sp.b, [2.0], rtol=1e-15)
    assert_allclose(info.row_scale, [0.2])
    assert_array_equal(sp.H, p.H)
    assert_array_equal(sp.x0, p.x0)

    unit = small_problem(A=[[1.0, 0.0], [0.0, -1.0]], b=[0.0, -2.0])
    su, info = row_normalize(unit)
    assert_array_equal(su.A, unit.A)
    assert_array_equal(info.row_scale, [1.0, 1.0])


def test_row_normalize_zero_row():
    with pytest.raises(ProblemError):
        row_normalize(small_problem(A=[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))


def test_norm_factor_floor():
    p = Problem(H=np.zeros((1, 1)), A=[[1e-30]], b=[0.0], c=[0.0])
    assert norm_factor(p) == 1e-12


def test_unscale_multipliers():
    p = Problem(H=np.eye(2), A=[[3.0, 4.0], [0.0, 2.0]], b=[0.0, 0.0], c=[1.0, 1.0])
    _, info = row_normalize(p)
    assert_allclose(unscale_multipliers([5.0, 4.0], info), [1.0, 2.0])


def test_objective_gradient_slack_examples():
    z = Problem(H=np.zeros((2, 2)), A=[[1.0, 0.0]], b=[0.0], c=[0.0, 0.0])
    assert objective(z, [3.0, -1.0]) == 0.0
    assert_array_equal(gradient(z, [3.0, -1.0]), [0.0, 0.0])

    p = Problem(H=[[2.0]], A=[[1.0], [-1.0]], b=[0.0, -2.0], c=[-2.0])
    assert objective(p, [1.0]) == -1.0
    assert_array_equal(gradient(p, [1.0]), [0.0])
    assert_array_equal(slack(p, [1.0]), [1.0, 1.0])
    with pytest.raises(ValueError):
        slack(p, [1.0, 2.0])


def test_error_metric_examples(hand_interior):
    p = hand_interior
    _, info = row_normalize(p)
    assert info.norm_factor == 2.0
    assert error_metric(p, [1.0], [0.0], info) == 0.0
    v, w = kkt_residuals(p, [0.0], [0.0])
    assert_array_equal(v, [-2.0])
    assert_array_equal(w, [0.0])
    assert error_metric(p, [0.0], [0.0], info) == 1.0
    # stationary with zero multipliers: slack does not matter
    assert error_metric(p, [1.0], [0.0]) == 0.0


def test_augment_infeasible_examples():
    p = small_problem()
    aug = augment_infeasible(p, 1.0)
    assert (aug.n, aug.m) == (5, 6)
    assert_array_equal(aug.x0, [1.0, 1.0, 1.0, 1.0, 1.0])
    assert validate(aug) == []

    one = Problem(H=[[1.0]], A=[[1.0]], b=[5.0], c=[0.0])
    aug1 = augment_infeasible(one, 10.0, x=[0.0])
    assert_array_equal(aug1.x0, [0.0, 6.0])
    assert_array_equal(slack(aug1, aug1.x0), [1.0, 6.0])
    assert_array_equal(aug1.c, [0.0, 10.0])
    with pytest.raises(ValueError):
        augment_infeasible(one, 0.0)


def test_augment_equalities_examples():
    p = small_problem()
    assert augment_equalities(p, np.zeros((0, 2)), np.zeros(0), 1.0) is p
    C = np.array([[1.0, -1.0]])
    d = np.array([0.0])
    aug = augment_equalities(p, C, d, 5.0)
    assert (aug.n, aug.m) == (3, 5)
    # x0 = (1, 1) satisfies Cx = d, so y0 = 1 and both new blocks have slack 1
    assert_array_equal(aug.x0, [1.0, 1.0, 1.0])
    assert_array_equal(slack(aug, aug.x0)[3:], [1.0, 1.0])
    with pytest.raises(ValueError):
        augment_equalities(p, np.ones((1, 3)), d, 1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_error_zero_at_oracle_points(seed):
    p = tiny_instance(np.random.default_rng(seed))
    sol = kkt_enumerate(p)
    assert error_metric(p, sol.x, sol.lam) <= 1e-9 * max(1.0, np.abs(sol.lam).max())
    assert error_metric(p, p.x0, np.ones(p.m)) >= 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_row_normalize_idempotent(seed):
    p = tiny_instance(np.random.default_rng(seed))
    s1, i1 = row_normalize(p)
    s2, i2 = row_normalize(s1)
    assert_allclose(s2.A, s1.A, atol=1e-14)
    assert_allclose(s2.b, s1.b, atol=1e-14)
    assert_allclose(i2.row_scale, 1.0, atol=1e-14)
    # positive scaling keeps the sign of every slack
    assert np.all((slack(s1, p.x0) > 0) == (slack(p, p.x0) > 0))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    p = tiny_instance(rng)
    x = rng.standard_normal(p.n)
    h = 1e-5
    fd = np.array([(objective(p, x + h * e) - objective(p, x - h * e)) / (2 * h) for e in np.eye(p.n)])
    g = gradient(p, x)
    assert np.linalg.norm(fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("seed", range(6))
def test_penalty_solution_has_zero_elastic_part(seed):
    rng = np.random.default_rng(100 + seed)
    p = tiny_instance(rng, n=2, m=3)
    aug = augment_infeasible(p, 1e3)
    sol = kkt_enumerate(aug)
    assert_allclose(sol.x[2:], 0.0, atol=1e-9)
    assert_allclose(sol.x[:2], kkt_enumerate(p).x, atol=1e-8)
