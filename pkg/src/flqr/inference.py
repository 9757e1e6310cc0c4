"""Pointwise intervals, simultaneous bands, and conditional-quantile intervals.

All widths run through the eigensystem: with B_hat the residual density at
its tau-quantile and (rho_nu, phi_nu) the diagonalizing pairs,

  pointwise:  +/- z * sqrt( tau(1-tau)/(n B_hat) * sum phi_nu(t)^2/(1+lam rho_nu)^2 )
  band:       +/- q / sqrt(n), q the level-quantile of sup_t |H| over simulated
              paths H(t) = sum kappa_nu/(1+lam rho_nu) xi_nu phi_nu(t),
              kappa_nu^2 = (tau - tau^2) mean_i (int X_i phi_nu)^2
  quantile:   +/- z * sqrt( tau(1-tau) sigma^2 / (n B_hat) ),
              sigma^2 = 1/B_hat + sum (int x0 phi_nu)^2/(1+lam rho_nu)^2

Intervals are centered at the estimate; the regularization bias is not
estimable without the truth, so a shrinkage proxy ||W_lam beta_hat|| is
reported for diagnostics instead.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .estimator import FitResult, predict
from .exceptions import ConfigMismatch, DomainError, GridMismatch, InsufficientPaths
from .grids import GridFunction, integrate
from .spectrum import EigenSystem

MIN_SCB_PATHS = 1000
_PATH_CHUNK = 4096


def normal_quantile(level: float) -> float:
    """Two-sided critical value z such that P(|Z| <= z) = level."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    return float(ndtri(0.5 + 0.5 * level))


@dataclass(frozen=True)
class PointwiseCi:
    t: float
    tau: float
    center: float
    half_width: float
    level: float

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width


@dataclass(frozen=True)
class Scb:
    level: float
    q_alpha: float
    center: GridFunction
    lower: GridFunction
    upper: GridFunction
    n_paths: int
    seed: int


@dataclass(frozen=True)
class QuantileCi:
    tau: float
    center: float
    half_width: float
    level: float

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width


def _check_compatible(fit: FitResult, es: EigenSystem):
    if not fit.grid.matches(es.grid):
        raise ConfigMismatch("fit and eigensystem grids differ")
    scale = max(abs(fit.b_hat), abs(es.b_hat))
    if abs(fit.b_hat - es.b_hat) > 1e-9 * scale:
        raise ConfigMismatch(
            f"eigensystem built with b_hat = {es.b_hat}, fit has {fit.b_hat}"
        )


def _variance_profile(fit: FitResult, es: EigenSystem, phi_vals: np.ndarray) -> np.ndarray:
    """tau(1-tau)/(n B) * sum_nu phi_nu(.)^2 / (1 + lam rho_nu)^2."""
    n = fit.residuals.size
    shrink = 1.0 / (1.0 + fit.lam * es.rho) ** 2
    s = (phi_vals**2) @ shrink
    return fit.tau * (1.0 - fit.tau) / (n * fit.b_hat) * s


def pointwise_ci(fit: FitResult, es: EigenSystem, t0: float, level: float = 0.95) -> PointwiseCi:
    """Pointwise confidence interval for the slope at t0."""
    if not 0.0 <= t0 <= 1.0:
        raise DomainError(f"t0 must lie in [0, 1], got {t0}")
    _check_compatible(fit, es)
    z = normal_quantile(level)
    phi_vals = es.phi_at(t0)  # (1, n_eig)
    var = float(_variance_profile(fit, es, phi_vals)[0])
    center = float(fit.beta_at(t0)[0])
    return PointwiseCi(
        t=float(t0), tau=fit.tau, center=center,
        half_width=z * np.sqrt(var), level=level,
    )


def ci_profile(fit: FitResult, es: EigenSystem, level: float = 0.95):
    """Pointwise half-widths at every grid point; returns (centers, half_widths)."""
    _check_compatible(fit, es)
    z = normal_quantile(level)
    var = _variance_profile(fit, es, es.phi_matrix)
    return fit.beta_hat.values.copy(), z * np.sqrt(var)


def scb(
    fit: FitResult,
    es: EigenSystem,
    level: float = 0.95,
    n_paths: int = 10_000,
    seed: int = 0,
) -> Scb:
    """Simultaneous confidence band calibrated by simulated sup-norms."""
    _check_compatible(fit, es)
    if n_paths < MIN_SCB_PATHS:
        raise InsufficientPaths(f"need at least {MIN_SCB_PATHS} paths, got {n_paths}")
    if not 0.0 < level < 1.0:
        raise DomainError("confidence level must lie in (0, 1)")
    tau, n = fit.tau, fit.residuals.size
    kappa = np.sqrt((tau - tau * tau) * np.mean(es.scores**2, axis=0))
    amp = kappa / (1.0 + fit.lam * es.rho)

    rng = np.random.Generator(np.random.Philox(key=seed))
    draws = rng.standard_normal((n_paths, es.n_eig))
    sups = np.empty(n_paths)
    for start in range(0, n_paths, _PATH_CHUNK):
        block = draws[start : start + _PATH_CHUNK]
        paths = (block * amp) @ es.phi_matrix.T
        sups[start : start + block.shape[0]] = np.abs(paths).max(axis=1)
    q_alpha = float(np.quantile(sups, level))

    half = q_alpha / np.sqrt(n)
    center = fit.beta_hat
    lower = GridFunction(fit.grid, center.values - half)
    upper = GridFunction(fit.grid, center.values + half)
    return Scb(
        level=level, q_alpha=q_alpha, center=center,
        lower=lower, upper=upper, n_paths=n_paths, seed=seed,
    )


def quantile_ci(
    fit: FitResult, es: EigenSystem, x0: GridFunction, level: float = 0.95
) -> QuantileCi:
    """Confidence interval for the conditional tau-quantile at curve x0."""
    _check_compatible(fit, es)
    if not fit.grid.matches(x0.grid):
        raise GridMismatch("x0 lives on a different grid")
    z = normal_quantile(level)
    x_nu = (x0.values * x0.grid.weights) @ es.phi_matrix  # (n_eig,)
    shrink = 1.0 / (1.0 + fit.lam * es.rho) ** 2
    sigma2 = 1.0 / fit.b_hat + float((x_nu**2) @ shrink)
    n = fit.residuals.size
    half = z * np.sqrt(fit.tau * (1.0 - fit.tau) * sigma2 / (n * fit.b_hat))
    return QuantileCi(
        tau=fit.tau, center=predict(fit, x0), half_width=float(half), level=level
    )


def shrinkage_bias_proxy(fit: FitResult, es: EigenSystem) -> float:
    """L2 norm of W_lam applied to the fitted slope (regularization-bias proxy)."""
    _check_compatible(fit, es)
    # Least-squares phi-basis coefficients of the fitted slope on the grid.
    coeffs = np.linalg.lstsq(es.phi_matrix, fit.beta_hat.values, rcond=None)[0]
    mult = fit.lam * es.rho / (1.0 + fit.lam * es.rho)
    shrunk = es.phi_matrix @ (coeffs * mult)
    return float(np.sqrt(max(integrate(GridFunction(fit.grid, shrunk * shrunk)), 0.0)))


def save_band_csv(path, grid_points, center, lower, upper) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "center", "lower", "upper"])
        for row in zip(grid_points, center, lower, upper):
            writer.writerow([repr(float(v)) for v in row])


def save_quantile_ci_json(path, ci: QuantileCi, extra: dict | None = None) -> None:
    doc = {
        "tau": ci.tau,
        "level": ci.level,
        "center": ci.center,
        "half_width": ci.half_width,
        "lower": ci.lower,
        "upper": ci.upper,
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
