"""Regression assembly, ridge solve, constraint-gap root, constrained solve."""

import math

import numpy as np
import pytest

from stable_sysid import (
    FitProblem,
    Gaussian,
    InputError,
    KernelInstance,
    build_regression_data,
    find_alpha_bar,
    gamma_fn,
    gram_matrix,
    solve_constrained,
    solve_norm_constrained,
    solve_ridge,
)

from oracles import projected_gradient_min, quadratic_objective, random_psd


class TestBuildRegressionData:
    def test_unrolls_the_window_definition(self):
        data = build_regression_data([10.0, 20.0, 30.0], [1.0, 2.0, 3.0], 1)
        assert data.regressors.tolist() == [[1.0, 10.0, 20.0], [2.0, 20.0, 30.0]]
        assert data.targets.tolist() == [2.0, 3.0]

    def test_minimum_size_single_row(self):
        data = build_regression_data([1.0, 2.0], [5.0, 6.0], 1)
        assert data.size == 1
        assert data.regressors.tolist() == [[5.0, 1.0, 2.0]]
        assert data.targets.tolist() == [6.0]

    def test_row_dimension_five_for_order_two(self):
        rng = np.random.default_rng(0)
        data = build_regression_data(rng.normal(size=50), rng.normal(size=50), 2)
        assert data.regressors.shape == (48, 5)

    def test_too_short_rejected(self):
        with pytest.raises(InputError, match="n > m"):
            build_regression_data([1.0, 2.0], [1.0, 2.0], 2)

    def test_hand_check_order_two(self):
        u = np.array([1.0, 2.0, 3.0, 4.0])
        y = np.array([10.0, 20.0, 30.0, 40.0])
        data = build_regression_data(u, y, 2)
        assert data.regressors.tolist() == [
            [10.0, 20.0, 1.0, 2.0, 3.0],
            [20.0, 30.0, 2.0, 3.0, 4.0],
        ]
        assert data.targets.tolist() == [30.0, 40.0]


class TestSolveRidge:
    def test_identity_case(self):
        c = solve_ridge(np.eye(2), np.array([1.0, 2.0]), 1.0)
        assert c == pytest.approx([0.5, 1.0])

    def test_zero_targets(self):
        c = solve_ridge(np.eye(3) * 2.0, np.zeros(3), 0.5)
        assert np.all(c == 0.0)

    def test_residual_on_random_spd(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            K = random_psd(rng, 10)
            y = rng.normal(size=10)
            beta = 10.0 ** rng.uniform(-10, 1)
            c = solve_ridge(K, y, beta)
            residual = np.linalg.norm((K + beta * np.eye(10)) @ c - y)
            assert residual <= 1e-10 * np.linalg.norm(y)

    def test_beta_must_be_positive(self):
        with pytest.raises(InputError):
            solve_ridge(np.eye(2), np.zeros(2), 0.0)


class TestGammaFn:
    def test_scalar_example(self):
        value = gamma_fn(np.array([[1.0]]), np.array([2.0]), 2, 0.99, 0.0)
        assert value == pytest.approx(2 * 4 / 1 - 0.99, rel=1e-14)

    def test_zero_targets_give_minus_chi(self):
        K = random_psd(np.random.default_rng(2), 6)
        for alpha in (0.0, 0.3, 10.0):
            assert gamma_fn(K, np.zeros(6), 3, 0.5, alpha) == pytest.approx(-0.5)

    def test_limit_at_huge_alpha(self):
        rng = np.random.default_rng(3)
        K = random_psd(rng, 8)
        y = rng.normal(size=8)
        assert gamma_fn(K, y, 2, 0.99, 1e12) == pytest.approx(-0.99, abs=1e-6)

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            K = random_psd(rng, 7)
            y = rng.normal(size=7)
            a1, a2 = np.sort(10.0 ** rng.uniform(-6, 4, size=2))
            g1 = gamma_fn(K, y, 2, 0.99, float(a1))
            g2 = gamma_fn(K, y, 2, 0.99, float(a2))
            assert g2 <= g1 + 1e-12


class TestFindAlphaBar:
    def test_closed_form_scalar_root(self):
        # 2 * 4 / (1 + a)^2 = 0.99  =>  a = 2 sqrt(2 / 0.99) - 1
        alpha = find_alpha_bar(np.array([[1.0]]), np.array([2.0]), 2, 0.99)
        assert alpha == pytest.approx(2 * math.sqrt(2 / 0.99) - 1, rel=1e-12)

    def test_zero_targets_return_zero(self):
        assert find_alpha_bar(np.eye(4), np.zeros(4), 2, 0.99) == 0.0

    def test_slack_constraint_returns_zero(self):
        # tiny targets: gamma(0) = m y^2 / lambda - chi < 0
        assert find_alpha_bar(np.array([[1.0]]), np.array([0.01]), 2, 0.99) == 0.0

    def test_root_residual_small(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            K = random_psd(rng, 12)
            y = rng.normal(size=12) * 3
            alpha = find_alpha_bar(K, y, 2, 0.99)
            if alpha > 0:
                assert abs(gamma_fn(K, y, 2, 0.99, alpha)) <= 1e-10
            else:
                assert gamma_fn(K, y, 2, 0.99, 0.0) <= 0.0


class TestSolveConstrained:
    def _problem(self, rng, n=30, constrained=True, beta=1e-10, chi=0.99):
        u = rng.normal(size=n)
        y = rng.normal(size=n) * 0.5
        data = build_regression_data(u, y, 2)
        kernel = KernelInstance(Gaussian(), (1.0, 0.5, 0.1), 5)
        return FitProblem(data=data, kernel=kernel, beta=beta, chi=chi, constrained=constrained)

    def test_matches_ridge_when_beta_dominates(self):
        rng = np.random.default_rng(6)
        problem = self._problem(rng, beta=50.0)
        report = solve_constrained(problem)
        K = gram_matrix(problem.kernel, problem.data.regressors)
        ridge = solve_ridge(K, problem.data.targets, 50.0)
        assert report.coefficients == pytest.approx(ridge, rel=1e-12, abs=1e-14)
        assert report.effective_alpha == 50.0
        assert not report.constraint_active

    def test_scalar_example_hits_the_budget(self):
        c, alpha_bar = solve_norm_constrained(np.array([[1.0]]), np.array([2.0]), 2, 0.99, 1e-10)
        assert alpha_bar == pytest.approx(2 * math.sqrt(2 / 0.99) - 1, rel=1e-12)
        assert 2 * c[0] ** 2 == pytest.approx(0.99, rel=1e-10)

    def test_report_fields_consistent(self):
        rng = np.random.default_rng(7)
        problem = self._problem(rng)
        report = solve_constrained(problem)
        assert report.effective_alpha >= report.beta
        assert report.effective_alpha == max(report.alpha_bar, report.beta)
        assert report.rkhs_norm_sq >= 0
        assert report.mu == pytest.approx(2 * report.rkhs_norm_sq)
        assert report.mu <= 0.99 + 1e-8

    def test_unconstrained_mode_is_plain_ridge(self):
        rng = np.random.default_rng(8)
        problem = self._problem(rng, constrained=False, beta=1e-3)
        report = solve_constrained(problem)
        assert report.alpha_bar == 0.0
        assert not report.constraint_active
        K = gram_matrix(problem.kernel, problem.data.regressors)
        assert report.coefficients == pytest.approx(
            solve_ridge(K, problem.data.targets, 1e-3), rel=1e-10
        )

    def test_huge_chi_equals_ridge(self):
        rng = np.random.default_rng(9)
        data = build_regression_data(rng.normal(size=40), rng.normal(size=40), 2)
        K = gram_matrix(KernelInstance(Gaussian(), (1.0, 0.5, 0.1), 5), data.regressors)
        c_con, alpha_bar = solve_norm_constrained(K, data.targets, 2, 1e12, 1e-3)
        c_ridge = solve_ridge(K, data.targets, 1e-3)
        assert alpha_bar == 0.0
        assert c_con == pytest.approx(c_ridge, rel=1e-12, abs=1e-14)

    def test_against_projected_gradient_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            n = int(rng.integers(5, 30))
            K = random_psd(rng, n)
            y = rng.normal(size=n)
            m, chi, beta = 2, 0.99, 1e-10
            c, _ = solve_norm_constrained(K, y, m, chi, beta)
            assert m * float(c @ K @ c) <= chi + 1e-8
            c_pg = projected_gradient_min(K, y, m, chi, beta)
            val = quadratic_objective(K, y, beta, c)
            val_pg = quadratic_objective(K, y, beta, c_pg)
            assert val <= val_pg + 1e-6 * max(1.0, abs(val_pg))

    def test_kkt_residuals(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(5, 40))
            K = random_psd(rng, n)
            y = rng.normal(size=n)
            m, chi, beta = 2, 0.99, 1e-10
            c, alpha_bar = solve_norm_constrained(K, y, m, chi, beta)
            lam = (max(alpha_bar, beta) - beta) / m
            assert lam >= 0
            stationarity = np.linalg.norm((K + beta * np.eye(n)) @ (K @ c) - K @ y + lam * m * (K @ c))
            assert stationarity <= 1e-8 * max(np.linalg.norm(K @ y), 1e-12)
            slack = abs(lam * (m * float(c @ K @ c) - chi))
            assert slack <= 1e-8
