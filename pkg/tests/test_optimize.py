import math

import numpy as np
import pytest

from poptransfer.controls import Ansatz1, PolyPair
from poptransfer.lindblad import ground_state, propagate_schedule
from poptransfer.optimize import (
    PowellConfig,
    bracket_minimum,
    brent_min,
    optimize_ansatz,
    optimize_polynomial,
    powell_min,
    transfer_objective,
)


# bracketing and Brent

def test_bracket_contains_minimum():
    (a, b, c), (fa, fb, fc) = bracket_minimum(lambda x: (x - 7.3) ** 2, 0.0, 1.0)
    assert fb <= fa and fb <= fc
    assert min(a, c) < 7.3 < max(a, c)


def test_bracket_unbounded_raises():
    with pytest.raises(RuntimeError):
        bracket_minimum(lambda x: -x, 0.0, 1.0, max_evals=30)


def test_brent_quadratic():
    x, fx = brent_min(lambda x: (x - 2) ** 2, (0.0, 1.0, 5.0))
    assert x == pytest.approx(2.0, abs=1e-7)
    assert fx == pytest.approx((x - 2) ** 2)


def test_brent_cosine():
    x, _ = brent_min(math.cos, (2.0, 3.0, 4.5), tol=1e-10)
    assert x == pytest.approx(math.pi, abs=1e-8)


def test_brent_abs_against_grid_scan():
    f = lambda x: abs(x - 0.3)  # noqa: E731
    grid = np.linspace(-1, 1, 2_000_001)
    x_grid = grid[np.argmin(np.abs(grid - 0.3))]
    x, _ = brent_min(f, (-1.0, 0.0, 1.0), tol=1e-10)
    assert x == pytest.approx(x_grid, abs=1e-6)


def test_brent_invalid_bracket():
    with pytest.raises(ValueError):
        brent_min(lambda x: x * x, (1.0, 2.0, 3.0))


# Powell

def test_powell_separable_quadratic():
    f = lambda x: float(np.sum((x - np.arange(1, 5)) ** 2))  # noqa: E731
    res = powell_min(f, np.zeros(4))
    np.testing.assert_allclose(res.x, [1, 2, 3, 4], atol=1e-6)


def test_powell_rosenbrock():
    f = lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2  # noqa: E731
    res = powell_min(f, [-1.2, 1.0], PowellConfig(x_tol=1e-12, f_tol=1e-14, line_tol=1e-10))
    np.testing.assert_allclose(res.x, [1, 1], atol=1e-4)


def test_powell_monotone_and_not_worse():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(5, 5))
    Q = A @ A.T + np.eye(5)
    f = lambda x: float(x @ Q @ x + np.sin(x).sum())  # noqa: E731
    x0 = rng.normal(size=5)
    res = powell_min(f, x0)
    assert res.fun <= f(x0)
    assert np.all(np.diff(res.history) <= 0)


def test_powell_direction_permutation_invariant():
    Q = np.array([[3.0, 1.0, 0.2], [1.0, 2.0, 0.5], [0.2, 0.5, 1.5]])
    b = np.array([1.0, -2.0, 0.5])
    f = lambda x: float(x @ Q @ x - 2 * b @ x)  # noqa: E731
    exact = np.linalg.solve(Q, b)
    for perm in ([0, 1, 2], [2, 0, 1], [1, 2, 0]):
        res = powell_min(f, np.zeros(3), PowellConfig(f_tol=1e-14, line_tol=1e-10), directions=np.eye(3)[perm])
        np.testing.assert_allclose(res.x, exact, atol=1e-6)


def test_powell_nonfinite_objective():
    with pytest.raises(FloatingPointError):
        powell_min(lambda x: float("nan"), [0.0])


def test_powell_eval_budget():
    res = powell_min(lambda x: float(np.sum(np.cos(3 * x) + x**2)), np.ones(3), PowellConfig(max_evals=40))
    assert res.n_evals <= 40


def test_powell_config_validation():
    with pytest.raises(ValueError):
        PowellConfig(x_tol=0)
    with pytest.raises(ValueError):
        PowellConfig(max_iter=0)


# protocol drivers

def test_transfer_objective_sign_and_failure():
    obj = transfer_objective(lambda p: Ansatz1(*p), 40.0)
    ref = propagate_schedule(ground_state(), Ansatz1(5.11, -0.038, 21.51, 0.29), 40.0).final_target
    assert obj(np.array([5.11, -0.038, 21.51, 0.29])) == pytest.approx(-ref, abs=1e-8)
    # exp(k x^2) overflows the step budget: scored as zero population.
    assert obj(np.array([0.0, 1.0, 400.0, 0.0])) == 0.0


def test_optimize_ansatz_deterministic_and_improves():
    cfg = PowellConfig(restarts=2, max_evals=150, seed=3)
    a = optimize_ansatz(20.0, "ansatz1", cfg)
    b = optimize_ansatz(20.0, "ansatz1", cfg)
    np.testing.assert_array_equal(a.params, b.params)
    assert a.score == b.score == max(a.run_scores)
    assert isinstance(a.schedule, Ansatz1)
    assert a.score == pytest.approx(propagate_schedule(ground_state(), a.schedule, 20.0).final_target, abs=1e-6)


def test_optimize_polynomial_single_run_deterministic():
    cfg = PowellConfig(max_evals=120, seed=5)
    a = optimize_polynomial(20.0, 2, 1, cfg)
    b = optimize_polynomial(20.0, 2, 1, cfg)
    assert isinstance(a.schedule, PolyPair)
    assert len(a.schedule.coeffs_dp) == 3
    np.testing.assert_array_equal(a.params, b.params)
    assert a.score == b.score


def test_optimize_parity_polys_runs():
    res = optimize_ansatz(20.0, "parity_polys", PowellConfig(restarts=1, max_evals=60))
    assert 0.0 <= res.score <= 1.0
    with pytest.raises(ValueError):
        optimize_ansatz(20.0, "unknown")
