import dataclasses

import numpy as np
import pytest
from scipy.stats import norm

import flqr
from flqr import (
    ConfigMismatch,
    DomainError,
    GridFunction,
    GridMismatch,
    InsufficientPaths,
    normal_quantile,
    pointwise_ci,
    quantile_ci,
    scb,
)
from flqr.inference import ci_profile, save_band_csv, shrinkage_bias_proxy


class TestNormalQuantile:
    def test_reference_value(self):
        assert normal_quantile(0.95) == pytest.approx(1.959964, abs=1e-5)

    def test_against_scipy(self):
        for level in (0.5, 0.8, 0.9, 0.99, 0.999):
            assert normal_quantile(level) == pytest.approx(norm.ppf(0.5 + level / 2), abs=1e-9)

    def test_domain(self):
        with pytest.raises(DomainError):
            normal_quantile(1.0)


class TestPointwiseCi:
    def test_symmetry_and_positive_width(self, medium_fit, medium_eigensystem):
        ci = pointwise_ci(medium_fit, medium_eigensystem, 0.5)
        assert ci.half_width > 0
        assert ci.upper - ci.center == pytest.approx(ci.center - ci.lower, abs=1e-12)

    def test_tau_half_maximizes_width(self, medium_fit, medium_eigensystem):
        # tau(1-tau) is the only tau-dependence once everything else is fixed
        ci_mid = pointwise_ci(medium_fit, medium_eigensystem, 0.3)
        skew = dataclasses.replace(medium_fit, tau=0.25)
        ci_skew = pointwise_ci(skew, medium_eigensystem, 0.3)
        assert ci_mid.half_width >= ci_skew.half_width

    def test_monotone_level(self, medium_fit, medium_eigensystem):
        ci95 = pointwise_ci(medium_fit, medium_eigensystem, 0.4, level=0.95)
        ci99 = pointwise_ci(medium_fit, medium_eigensystem, 0.4, level=0.99)
        assert ci99.half_width > ci95.half_width
        assert ci99.lower < ci95.lower < ci95.upper < ci99.upper

    def test_center_is_beta_hat(self, medium_fit, medium_eigensystem):
        t0 = medium_fit.grid.points[37]
        ci = pointwise_ci(medium_fit, medium_eigensystem, float(t0))
        assert ci.center == medium_fit.beta_hat.values[37]

    def test_config_mismatch(self, medium_fit, medium_sample):
        other = flqr.solve_eigensystem(medium_sample, b_hat=medium_fit.b_hat * 3)
        with pytest.raises(ConfigMismatch):
            pointwise_ci(medium_fit, other, 0.5)

    def test_domain(self, medium_fit, medium_eigensystem):
        with pytest.raises(DomainError):
            pointwise_ci(medium_fit, medium_eigensystem, 1.2)


class TestScb:
    def test_contains_pointwise_ci(self, medium_fit, medium_eigensystem):
        band = scb(medium_fit, medium_eigensystem, n_paths=4000, seed=0)
        _, hw = ci_profile(medium_fit, medium_eigensystem, 0.95)
        half_band = band.upper.values - band.center.values
        assert np.all(half_band >= hw - 1e-12)

    def test_root_n_scaling(self, medium_fit, medium_eigensystem):
        band = scb(medium_fit, medium_eigensystem, n_paths=4000, seed=0)
        quadrupled = dataclasses.replace(
            medium_fit, residuals=np.tile(medium_fit.residuals, 4)
        )
        band4 = scb(quadrupled, medium_eigensystem, n_paths=4000, seed=0)
        half1 = band.upper.values - band.center.values
        half4 = band4.upper.values - band4.center.values
        assert np.allclose(half4, half1 / 2.0, atol=1e-12)

    def test_seed_reproducibility(self, medium_fit, medium_eigensystem):
        b1 = scb(medium_fit, medium_eigensystem, n_paths=2000, seed=5)
        b2 = scb(medium_fit, medium_eigensystem, n_paths=2000, seed=5)
        assert b1.q_alpha == b2.q_alpha

    def test_path_count_stability(self, medium_fit, medium_eigensystem):
        q1 = scb(medium_fit, medium_eigensystem, n_paths=10_000, seed=1).q_alpha
        q2 = scb(medium_fit, medium_eigensystem, n_paths=100_000, seed=1).q_alpha
        assert abs(q2 - q1) / q1 < 0.02

    def test_insufficient_paths(self, medium_fit, medium_eigensystem):
        with pytest.raises(InsufficientPaths):
            scb(medium_fit, medium_eigensystem, n_paths=500, seed=0)

    def test_band_ordering(self, medium_fit, medium_eigensystem):
        band = scb(medium_fit, medium_eigensystem, n_paths=2000, seed=2)
        assert np.all(band.lower.values <= band.center.values)
        assert np.all(band.center.values <= band.upper.values)


class TestQuantileCi:
    def test_zero_curve_variance(self, medium_fit, medium_eigensystem, grid101):
        x0 = GridFunction(grid101, np.zeros(101))
        ci = quantile_ci(medium_fit, medium_eigensystem, x0)
        n = medium_fit.residuals.size
        tau, b = medium_fit.tau, medium_fit.b_hat
        expected = normal_quantile(0.95) * np.sqrt(tau * (1 - tau) * (1 / b) / (n * b))
        assert ci.half_width == pytest.approx(expected, abs=1e-12)
        assert ci.center == medium_fit.alpha_hat

    def test_quadratic_scaling_in_x0(self, medium_fit, medium_eigensystem, grid101):
        rng = np.random.default_rng(3)
        vals = rng.standard_normal(101)
        z = normal_quantile(0.95)
        n = medium_fit.residuals.size
        tau, b = medium_fit.tau, medium_fit.b_hat
        def sigma2_of(x):
            ci = quantile_ci(medium_fit, medium_eigensystem, GridFunction(grid101, x))
            return (ci.half_width / z) ** 2 * n * b / (tau * (1 - tau))
        s1 = sigma2_of(vals) - 1 / b
        s2 = sigma2_of(2 * vals) - 1 / b
        assert s2 == pytest.approx(4 * s1, rel=1e-9)

    def test_grid_mismatch(self, medium_fit, medium_eigensystem):
        x0 = GridFunction(flqr.Grid.uniform(51), np.zeros(51))
        with pytest.raises(GridMismatch):
            quantile_ci(medium_fit, medium_eigensystem, x0)

    def test_symmetric(self, medium_fit, medium_eigensystem, grid101):
        x0 = GridFunction(grid101, np.sin(2 * np.pi * grid101.points))
        ci = quantile_ci(medium_fit, medium_eigensystem, x0)
        assert ci.upper - ci.center == pytest.approx(ci.center - ci.lower, abs=1e-12)


class TestDiagnostics:
    def test_bias_proxy_increases_with_lambda(self, medium_fit, medium_eigensystem):
        small = shrinkage_bias_proxy(dataclasses.replace(medium_fit, lam=1e-8), medium_eigensystem)
        large = shrinkage_bias_proxy(dataclasses.replace(medium_fit, lam=1e-2), medium_eigensystem)
        assert 0.0 <= small < large

    def test_band_csv(self, medium_fit, medium_eigensystem, tmp_path):
        centers, hw = ci_profile(medium_fit, medium_eigensystem)
        out = tmp_path / "band.csv"
        save_band_csv(out, medium_fit.grid.points, centers, centers - hw, centers + hw)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "t,center,lower,upper"
        assert len(lines) == medium_fit.grid.size + 1
