import numpy as np
import pytest

from signls.linalg import CoefficientVector
from signls.solvers import (
    ACTIVE_SET,
    PROJECTED_GRADIENT,
    SolverOptions,
    brute_force_nnls,
    lambda_max,
    solve_l1_constrained_nnls,
    solve_nnls,
    solve_oracle_nnls,
    solve_restricted_ols,
    verify_kkt,
)
from signls.tomography import toy_instance, simulate_observations


def residual_sq(X, Y, b):
    r = Y - X @ b
    return float(r @ r)


def test_toy_exact_recovery_both_algorithms():
    inst = toy_instance()
    Y = simulate_observations(inst, 0).values
    for algo in (ACTIVE_SET, PROJECTED_GRADIENT):
        sol = solve_nnls(inst.X, Y, SolverOptions(algorithm=algo))
        assert sol.converged
        assert np.max(np.abs(sol.beta.values - np.array([10.0, 10.0, 0.0]))) < 1e-6


def test_gradient_convention():
    # gradient field is X'(X b - Y), no factor 2
    rng = np.random.default_rng(0)
    X = rng.standard_normal((8, 4))
    Y = rng.standard_normal(8)
    sol = solve_nnls(X, Y)
    expected = X.T @ (X @ sol.beta.values - Y)
    assert np.allclose(sol.gradient, expected, atol=1e-12)


def test_agreement_with_brute_force():
    rng = np.random.default_rng(1)
    for trial in range(60):
        n = int(rng.integers(3, 11))
        p = int(rng.integers(1, 9))
        X = rng.standard_normal((n, p))
        Y = rng.standard_normal(n)
        a = solve_nnls(X, Y)
        g = solve_nnls(X, Y, SolverOptions(algorithm=PROJECTED_GRADIENT))
        ref = brute_force_nnls(X, Y)
        ro = residual_sq(X, Y, ref.values)
        assert abs(a.objective - ro) < 1e-8, trial
        assert abs(g.objective - ro) < 1e-8, trial
        assert np.max(np.abs(a.beta.values - ref.values)) < 1e-6, trial


def test_kkt_report_passes_on_solutions_and_fails_on_junk():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((10, 5))
    Y = rng.standard_normal(10)
    sol = solve_nnls(X, Y)
    assert verify_kkt(X, Y, sol.beta).passed
    junk = CoefficientVector(np.full(5, 0.5))
    assert not verify_kkt(X, Y, junk).passed


def test_l1_constraint_binds_and_shrinks():
    inst = toy_instance()
    Y = simulate_observations(inst, 0).values
    full = solve_nnls(inst.X, Y)
    assert abs(lambda_max(full) - 20.0) < 1e-9
    half = solve_l1_constrained_nnls(inst.X, Y, 10.0)
    assert half.converged
    assert float(half.beta.values.sum()) <= 10.0 + 1e-9
    assert half.objective >= full.objective - 1e-12
    # budget at lambda_max changes nothing
    same = solve_l1_constrained_nnls(inst.X, Y, 20.0)
    assert abs(same.objective - full.objective) < 1e-8


def test_l1_zero_budget_gives_zero_vector():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((5, 3))
    Y = rng.standard_normal(5)
    sol = solve_l1_constrained_nnls(X, Y, 0.0)
    assert sol.converged and np.all(sol.beta.values == 0.0)


def test_l1_solution_optimal_against_feasible_grid():
    rng = np.random.default_rng(4)
    for _ in range(20):
        X = rng.standard_normal((6, 3))
        Y = rng.standard_normal(6)
        r = float(rng.uniform(0.1, 1.0))
        sol = solve_l1_constrained_nnls(X, Y, r)
        assert sol.converged
        # random feasible points never beat the solver
        for _ in range(200):
            y = np.abs(rng.standard_normal(3))
            if y.sum() > r:
                y *= r / y.sum()
            assert residual_sq(X, Y, y) >= sol.objective - 1e-8


def test_l1_start_hint_does_not_change_optimum():
    rng = np.random.default_rng(5)
    for _ in range(20):
        X = rng.standard_normal((7, 4))
        Y = rng.standard_normal(7)
        base = solve_nnls(X, Y)
        r = 0.6 * lambda_max(base)
        if r == 0.0:
            continue
        cold = solve_l1_constrained_nnls(X, Y, r)
        warm = solve_l1_constrained_nnls(X, Y, r, start=base.beta.values)
        assert abs(cold.objective - warm.objective) < 1e-7


def test_oracle_nnls_zero_off_support():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((12, 6))
    Y = rng.standard_normal(12)
    S = np.array([1, 4])
    sol = solve_oracle_nnls(X, Y, S)
    off = np.setdiff1d(np.arange(6), S)
    assert np.all(sol.beta.values[off] == 0.0)
    # matches solving on the submatrix
    sub = solve_nnls(X[:, S], Y)
    assert np.allclose(sol.beta.values[S], sub.beta.values, atol=1e-10)


def test_restricted_ols_matches_lstsq_and_checks_rank():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((10, 5))
    Y = rng.standard_normal(10)
    S = np.array([0, 2, 3])
    b = solve_restricted_ols(X, Y, S)
    ref, *_ = np.linalg.lstsq(X[:, S], Y, rcond=None)
    assert np.allclose(b.values[S], ref, atol=1e-10)
    # duplicated column: not unique
    Xdup = X.copy()
    Xdup[:, 2] = Xdup[:, 0]
    with pytest.raises(ValueError, match="rank"):
        solve_restricted_ols(Xdup, Y, np.array([0, 2]))


def test_nonnegative_output_always():
    rng = np.random.default_rng(8)
    for algo in (ACTIVE_SET, PROJECTED_GRADIENT):
        for _ in range(20):
            X = rng.standard_normal((6, 4))
            Y = rng.standard_normal(6)
            sol = solve_nnls(X, Y, SolverOptions(algorithm=algo))
            assert np.all(sol.beta.values >= 0.0)


def test_perfect_fit_when_truth_nonnegative_and_noiseless():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((20, 5))
    truth = np.abs(rng.standard_normal(5))
    Y = X @ truth
    sol = solve_nnls(X, Y)
    assert sol.objective < 1e-18
    assert np.max(np.abs(sol.beta.values - truth)) < 1e-7


def test_rank_deficient_duplicate_columns_still_converges():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((8, 3))
    X = np.hstack([X, X[:, :1]])  # duplicate first column
    Y = rng.standard_normal(8)
    for algo in (ACTIVE_SET, PROJECTED_GRADIENT):
        sol = solve_nnls(X, Y, SolverOptions(algorithm=algo))
        assert sol.converged
        assert verify_kkt(X, Y, sol.beta).passed


def test_underdetermined_l1_certified():
    # p > n with duplicated columns: the finisher path must still certify
    rng = np.random.default_rng(11)
    X = rng.uniform(0.0, 1.0, size=(6, 18))
    X[:, 9:] = X[:, :9]
    Y = rng.standard_normal(6) + X[:, 0] * 3.0
    base = solve_nnls(X, Y)
    for frac in (0.3, 0.6, 0.9):
        sol = solve_l1_constrained_nnls(X, Y, frac * lambda_max(base), start=base.beta.values)
        assert sol.converged, frac


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(kkt_tolerance=0.0)
    with pytest.raises(ValueError):
        SolverOptions(max_iterations=0)
    with pytest.raises(ValueError):
        SolverOptions(algorithm="newton")
