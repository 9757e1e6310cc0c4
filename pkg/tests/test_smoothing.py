import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erf

from flqr import DomainError, check_loss, kbar, smoothed_loss, smoothed_loss_gradient
from flqr.smoothing import SmoothKernel

SQRT_2PI = np.sqrt(2.0 * np.pi)


def quadrature_loss(u, tau, h):
    """Independent oracle: numerical convolution of the check function."""
    lo, hi = u - 12 * h, u + 12 * h
    val, _ = quad(
        lambda v: check_loss(v, tau) * np.exp(-0.5 * ((v - u) / h) ** 2) / (h * SQRT_2PI),
        lo, hi, limit=300,
    )
    return val


class TestCheckLoss:
    def test_positive_residual(self):
        assert check_loss(2.0, 0.5) == pytest.approx(1.0)

    def test_negative_residual(self):
        assert check_loss(-1.0, 0.25) == pytest.approx(0.75)

    def test_zero(self):
        for tau in (0.1, 0.5, 0.9):
            assert check_loss(0.0, tau) == 0.0

    def test_tau_domain(self):
        with pytest.raises(DomainError):
            check_loss(1.0, 0.0)
        with pytest.raises(DomainError):
            check_loss(1.0, 1.0)


class TestKbar:
    def test_symmetry_point(self):
        assert kbar(0.0) == pytest.approx(0.5)

    def test_saturates(self):
        assert kbar(40.0) == pytest.approx(1.0, abs=1e-15)

    def test_against_erf(self):
        assert kbar(1.96) == pytest.approx(0.5 * (1 + erf(1.96 / np.sqrt(2))), abs=1e-12)
        assert kbar(1.96) == pytest.approx(0.9750, abs=1e-4)


class TestSmoothedLoss:
    def test_at_origin_against_quadrature(self):
        assert smoothed_loss(0.0, 0.5, 0.1) == pytest.approx(0.1 / SQRT_2PI, abs=1e-12)
        assert smoothed_loss(0.0, 0.5, 0.1) == pytest.approx(quadrature_loss(0.0, 0.5, 0.1), abs=1e-8)

    def test_far_from_origin(self):
        assert smoothed_loss(5.0, 0.5, 0.01) == pytest.approx(2.5, abs=1e-6)
        assert smoothed_loss(5.0, 0.5, 0.01) == pytest.approx(quadrature_loss(5.0, 0.5, 0.01), abs=1e-8)

    @pytest.mark.parametrize("tau", [0.25, 0.5, 0.9])
    def test_matches_quadrature_randomly(self, tau):
        rng = np.random.default_rng(5)
        for _ in range(10):
            u = rng.uniform(-3, 3)
            h = rng.uniform(0.05, 1.0)
            assert smoothed_loss(u, tau, h) == pytest.approx(quadrature_loss(u, tau, h), abs=1e-8)

    def test_dominates_check_loss(self):
        u = np.linspace(-5, 5, 1001)
        for tau in (0.25, 0.5, 0.75):
            assert np.all(smoothed_loss(u, tau, 0.2) >= check_loss(u, tau) - 1e-12)

    def test_h_domain(self):
        with pytest.raises(DomainError):
            smoothed_loss(1.0, 0.5, 0.0)
        with pytest.raises(DomainError):
            smoothed_loss(1.0, 0.5, -0.1)

    @pytest.mark.parametrize("h", [0.1, 0.01])
    @pytest.mark.parametrize("tau", [0.25, 0.5, 0.75])
    def test_uniform_gap_bound(self, tau, h):
        u = np.linspace(-4, 4, 4001)
        gap = smoothed_loss(u, tau, h) - check_loss(u, tau)
        assert gap.max() <= h / SQRT_2PI + 1e-10
        assert gap.min() >= -1e-12

    def test_convex_in_u(self):
        u = np.linspace(-3, 3, 601)
        vals = smoothed_loss(u, 0.3, 0.15)
        second = np.diff(vals, 2)
        assert second.min() >= -1e-12

    def test_gap_shrinks_with_h(self):
        u = np.linspace(-3, 3, 1201)
        gaps = [
            np.max(smoothed_loss(u, 0.4, h) - check_loss(u, 0.4))
            for h in (0.1, 0.01, 0.001)
        ]
        assert gaps[0] > gaps[1] > gaps[2]


class TestSmoothedLossGradient:
    def test_zero_at_origin_median(self):
        for h in (0.01, 0.1, 1.0):
            assert smoothed_loss_gradient(0.0, 0.5, h) == 0.0

    def test_limits(self):
        assert smoothed_loss_gradient(1e3, 0.3, 0.1) == pytest.approx(-0.3, abs=1e-12)
        assert smoothed_loss_gradient(-1e3, 0.3, 0.1) == pytest.approx(0.7, abs=1e-12)

    def test_matches_finite_differences(self):
        # the gradient is minus the u-derivative of the smoothed loss
        rng = np.random.default_rng(6)
        eps = 1e-6
        for _ in range(100):
            u = rng.uniform(-2, 2)
            tau = rng.uniform(0.05, 0.95)
            h = rng.uniform(0.05, 1.0)
            fd = (smoothed_loss(u + eps, tau, h) - smoothed_loss(u - eps, tau, h)) / (2 * eps)
            assert smoothed_loss_gradient(u, tau, h) == pytest.approx(-fd, abs=1e-7)


class TestSmoothKernel:
    def test_validation(self):
        with pytest.raises(DomainError):
            SmoothKernel(bandwidth=0.0)
        with pytest.raises(DomainError):
            SmoothKernel(bandwidth=0.1, family="uniform")
        assert SmoothKernel(bandwidth=0.1).family == "gaussian"
