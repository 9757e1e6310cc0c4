"""Check loss and its Gaussian convolution smoothing.

Smoothing replaces the non-differentiable check function rho_tau with

    l_h(u; tau) = int rho_tau(v) k_h(v - u) dv,

where k_h is a Gaussian density of bandwidth h.  The Gaussian choice keeps
closed forms for the loss and every gradient, so the fitting loop never
integrates numerically:

    l_h(u; tau) = tau*u - u*Phi(-u/h) + h*phi(u/h).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .exceptions import DomainError

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class SmoothKernel:
    """Smoothing kernel choice: family plus bandwidth."""

    bandwidth: float
    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise DomainError(f"unsupported kernel family {self.family!r}")
        if not self.bandwidth > 0:
            raise DomainError("bandwidth must be positive")


def _validate_tau(tau):
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")


def _validate_h(h):
    if not h > 0:
        raise DomainError(f"bandwidth must be positive, got {h}")


def check_loss(u, tau):
    """Check function rho_tau(u) = u [tau - 1(u < 0)]."""
    _validate_tau(tau)
    u = np.asarray(u, dtype=float)
    out = u * (tau - (u < 0))
    return float(out) if out.ndim == 0 else out


def kbar(v):
    """CDF of the smoothing kernel (standard normal CDF)."""
    v = np.asarray(v, dtype=float)
    out = ndtr(v)
    return float(out) if out.ndim == 0 else out


def smoothed_loss(u, tau, h):
    """Gaussian-smoothed check loss l_h(u; tau)."""
    _validate_tau(tau)
    _validate_h(h)
    u = np.asarray(u, dtype=float)
    z = u / h
    out = tau * u - u * ndtr(-z) + h * np.exp(-0.5 * z * z) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


def smoothed_loss_gradient(u, tau, h):
    """Residual score Kbar(-u/h) - tau.

    This is the factor appearing in every model-parameter derivative of the
    smoothed empirical risk (u is the fitted residual); it equals minus the
    derivative of l_h with respect to u.
    """
    _validate_tau(tau)
    _validate_h(h)
    u = np.asarray(u, dtype=float)
    out = ndtr(-u / h) - tau
    return float(out) if out.ndim == 0 else out
