"""Sharpe optimization on the simplex, moments, and the prescreen risk."""

import numpy as np
import pytest

from transrisk import (
    Portfolio,
    ReturnsDataset,
    estimate_moments,
    prescreen_risk_w2,
    project_simplex,
    sharpe_optimize,
    sharpe_ratio,
)
from transrisk.portfolio import _Objective
from transrisk.errors import (
    DegenerateVariance,
    DimensionMismatch,
    InsufficientHistory,
    NonPSDSigma,
    ValidationError,
    ZeroVariancePortfolio,
)


class TestTypes:
    def test_portfolio_simplex_invariants(self):
        with pytest.raises(ValidationError):
            Portfolio([0.5, 0.6])
        with pytest.raises(ValidationError):
            Portfolio([-0.1, 1.1])
        Portfolio([0.25, 0.75])

    def test_returns_need_two_periods(self):
        with pytest.raises(InsufficientHistory):
            ReturnsDataset(np.zeros((1, 3)))


class TestProjectSimplex:
    def test_already_feasible(self):
        w = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(project_simplex(w), w, atol=1e-14)

    def test_matches_quadratic_program(self):
        """Projection equals the argmin of ‖x − v‖² on the simplex,
        verified against a dense grid for d = 2."""
        rng = np.random.default_rng(1)
        grid = np.linspace(0.0, 1.0, 20001)
        simplex = np.column_stack([grid, 1.0 - grid])
        for _ in range(20):
            v = rng.normal(scale=2.0, size=2)
            proj = project_simplex(v)
            dists = np.sum((simplex - v) ** 2, axis=1)
            best = simplex[int(np.argmin(dists))]
            np.testing.assert_allclose(proj, best, atol=1e-4)

    def test_output_feasible(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            d = int(rng.integers(2, 8))
            w = project_simplex(rng.normal(scale=3.0, size=d))
            assert w.min() >= 0.0
            np.testing.assert_allclose(w.sum(), 1.0, atol=1e-12)


class TestEstimateMoments:
    def test_identical_rows_zero_covariance(self):
        data = ReturnsDataset(np.tile([0.01, 0.02], (2, 1)))
        mu, sigma = estimate_moments(data)
        np.testing.assert_allclose(mu, [0.01, 0.02])
        np.testing.assert_allclose(sigma, np.zeros((2, 2)), atol=1e-18)

    def test_constant_column_zero_variance(self):
        rng = np.random.default_rng(3)
        data = ReturnsDataset(np.column_stack([np.full(30, 0.01),
                                               rng.normal(size=30)]))
        _, sigma = estimate_moments(data)
        assert sigma[0, 0] <= 1e-18

    def test_generator_round_trip(self):
        rng = np.random.default_rng(4)
        mu_true = np.array([0.05, 0.1, -0.02])
        a = rng.normal(size=(3, 3)) * 0.1
        sigma_true = a @ a.T + 0.01 * np.eye(3)
        n = 10 ** 5
        draws = rng.multivariate_normal(mu_true, sigma_true, size=n)
        mu, sigma = estimate_moments(ReturnsDataset(draws))
        se_mu = np.sqrt(np.diag(sigma_true) / n)
        assert np.all(np.abs(mu - mu_true) <= 3.0 * se_mu)
        assert np.linalg.norm(sigma - sigma_true) <= 0.01


class TestSharpeRatio:
    def test_uniform_four_assets(self):
        port = Portfolio(np.full(4, 0.25))
        value = sharpe_ratio(port, np.ones(4), np.eye(4))
        np.testing.assert_allclose(value, 2.0, atol=1e-12)

    def test_homogeneous_in_mu(self):
        rng = np.random.default_rng(5)
        port = Portfolio(project_simplex(rng.normal(size=3)))
        mu = rng.normal(size=3)
        sigma = np.eye(3)
        base = sharpe_ratio(port, mu, sigma)
        np.testing.assert_allclose(sharpe_ratio(port, 3.0 * mu, sigma), 3.0 * base)

    def test_zero_variance_rejected(self):
        port = Portfolio([1.0, 0.0])
        with pytest.raises(ZeroVariancePortfolio):
            sharpe_ratio(port, np.ones(2), np.diag([0.0, 1.0]))


class TestSharpeOptimize:
    def test_symmetric_problem_centroid(self):
        port = sharpe_optimize(np.array([0.3, 0.3]), np.eye(2))
        np.testing.assert_allclose(port.weights, [0.5, 0.5], atol=1e-6)

    def test_two_asset_example_matches_grid(self):
        """argmax of (0.2w + 0.1(1−w))/‖(w,1−w)‖ sits at (2/3, 1/3)."""
        port = sharpe_optimize(np.array([0.2, 0.1]), np.eye(2))
        np.testing.assert_allclose(port.weights, [2.0 / 3.0, 1.0 / 3.0], atol=1e-4)
        grid = np.linspace(0.0, 1.0, 100001)
        values = (0.2 * grid + 0.1 * (1 - grid)) / np.sqrt(grid ** 2 + (1 - grid) ** 2)
        best = grid[int(np.argmax(values))]
        np.testing.assert_allclose(port.weights[0], best, atol=1e-4)

    def test_feasibility_and_stationarity(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            d = int(rng.integers(2, 7))
            mu = rng.uniform(-0.1, 0.2, size=d)
            a = rng.normal(size=(d, d)) * 0.1
            sigma = a @ a.T + 0.01 * np.eye(d)
            port = sharpe_optimize(mu, sigma)
            w = port.weights
            assert w.min() >= -1e-12
            np.testing.assert_allclose(w.sum(), 1.0, atol=1e-9)
            obj = _Objective(mu, sigma, None, 0.0)
            moved = project_simplex(w + 1e-2 * obj.gradient(w))
            assert np.linalg.norm(moved - w) / 1e-2 <= 1e-7

    def test_penalty_dominated_limit(self):
        rng = np.random.default_rng(7)
        anchor = Portfolio(project_simplex(rng.normal(size=4)))
        mu = rng.uniform(0.0, 0.2, size=4)
        a = rng.normal(size=(4, 4)) * 0.1
        sigma = a @ a.T + 0.02 * np.eye(4)
        port = sharpe_optimize(mu, sigma, anchor=anchor, penalty=1e9)
        assert np.linalg.norm(port.weights - anchor.weights) <= 1e-5

    def test_anchored_beats_anchor(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            d = 5
            mu = rng.uniform(0.0, 0.2, size=d)
            a = rng.normal(size=(d, d)) * 0.1
            sigma = a @ a.T + 0.02 * np.eye(d)
            anchor = Portfolio(project_simplex(rng.normal(size=d)))
            port = sharpe_optimize(mu, sigma, anchor=anchor, penalty=0.2)
            obj = _Objective(mu, sigma, anchor.weights, 0.2)
            assert obj.value(port.weights) >= obj.value(anchor.weights) - 1e-9
            uniform = np.full(d, 1.0 / d)
            assert obj.value(port.weights) >= obj.value(uniform) - 1e-9

    def test_scale_invariance_of_argmax(self):
        rng = np.random.default_rng(9)
        mu = rng.uniform(0.05, 0.2, size=4)
        a = rng.normal(size=(4, 4)) * 0.15
        sigma = a @ a.T + 0.02 * np.eye(4)
        base = sharpe_optimize(mu, sigma).weights
        for c in (0.5, 2.0, 10.0):
            scaled = sharpe_optimize(c * mu, sigma).weights
            assert np.linalg.norm(scaled - base) <= 1e-6

    def test_degenerate_variance_rejected(self):
        with pytest.raises(DegenerateVariance):
            sharpe_optimize(np.array([0.1, 0.2]), np.diag([1.0, 0.0]))

    def test_non_psd_rejected(self):
        with pytest.raises(NonPSDSigma):
            sharpe_optimize(np.array([0.1, 0.2]), np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestPrescreenRisk:
    def test_identical_datasets_zero(self):
        rng = np.random.default_rng(10)
        data = ReturnsDataset(rng.normal(size=(100, 3)))
        assert prescreen_risk_w2(data, data) <= 1e-12

    def test_symmetric(self):
        rng = np.random.default_rng(11)
        a = ReturnsDataset(rng.normal(size=(80, 3)))
        b = ReturnsDataset(rng.normal(loc=0.01, size=(90, 3)))
        np.testing.assert_allclose(prescreen_risk_w2(a, b), prescreen_risk_w2(b, a),
                                   atol=1e-12)

    def test_pure_shift_is_squared_norm(self):
        rng = np.random.default_rng(12)
        returns = rng.normal(scale=0.02, size=(200, 3))
        shift = np.array([0.01, -0.02, 0.005])
        a = ReturnsDataset(returns)
        b = ReturnsDataset(returns + shift)
        np.testing.assert_allclose(prescreen_risk_w2(a, b),
                                   float(shift @ shift), atol=1e-12)

    def test_matches_closed_form_at_scale(self):
        """Moment estimates from 10^5 draws land near the population
        squared-W2 between the true Gaussians."""
        from transrisk import GaussianDist, w2_gaussian_sq

        rng = np.random.default_rng(13)
        mu_a, mu_b = np.array([0.05, 0.0]), np.array([0.02, 0.03])
        sig_a = np.array([[0.04, 0.01], [0.01, 0.09]])
        sig_b = np.array([[0.02, -0.005], [-0.005, 0.03]])
        a = ReturnsDataset(rng.multivariate_normal(mu_a, sig_a, size=10 ** 5))
        b = ReturnsDataset(rng.multivariate_normal(mu_b, sig_b, size=10 ** 5))
        truth = w2_gaussian_sq(GaussianDist(mu_a, sig_a), GaussianDist(mu_b, sig_b))
        got = prescreen_risk_w2(a, b)
        assert abs(got - truth) / truth < 0.05

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(14)
        a = ReturnsDataset(rng.normal(size=(10, 2)))
        b = ReturnsDataset(rng.normal(size=(10, 3)))
        with pytest.raises(DimensionMismatch):
            prescreen_risk_w2(a, b)
