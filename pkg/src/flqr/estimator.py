"""Top-level fit/predict API for one or many quantile levels.

A fit at level tau minimizes the reduced objective over the representer
coordinates (alpha, d, c); the slope function is assembled once on the
grid as

    beta(t) = sum_l d_l psi_l(t) + sum_i c_i xi_i(t)

and every consumer (prediction, residuals, exports) reads that single
array.  Bandwidth defaults to the rule of thumb and the penalty to k-fold
cross-validation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import FlqrError, GridMismatch, InvalidInput, InvalidTauGrid
from .grids import FunctionalSample, Grid, GridFunction, inner_l2
from .optimizer import FitTrace, GdConfig, Theta, minimize
from .sobolev import (
    RepresenterGram,
    SobolevKernel,
    build_gram,
    null_basis_values,
)
from .tuning import TuningConfig, cross_validate_lambda, rot_bandwidth

SPARSITY_FLOOR = 1e-6


@dataclass(frozen=True)
class FitContext:
    """Kernel and Gram matrices shared by every fit on one sample."""

    sample: FunctionalSample
    kern: SobolevKernel
    gram: RepresenterGram

    @staticmethod
    def build(sample: FunctionalSample) -> "FitContext":
        kern = SobolevKernel(sample.grid)
        return FitContext(sample=sample, kern=kern, gram=build_gram(sample, kern))


@dataclass
class FitResult:
    """A fitted quantile model at one tau plus its tuning metadata."""

    tau: float
    theta: Theta
    lam: float
    h: float
    grid: Grid
    beta_hat: GridFunction
    alpha_hat: float
    residuals: np.ndarray
    b_hat: float
    trace: FitTrace
    cv_table: object | None = None

    def beta_at(self, points) -> np.ndarray:
        """Evaluate the fitted slope anywhere in [0, 1].

        Grid points return the stored assembly exactly; anything off the
        grid is linearly interpolated (quadrature treats curves as
        piecewise linear, so this stays consistent with every integral).
        """
        points = np.atleast_1d(np.asarray(points, dtype=float))
        out = np.empty(points.size)
        grid_pts = self.grid.points
        for j, t in enumerate(points):
            k = np.searchsorted(grid_pts, t)
            if k < grid_pts.size and abs(grid_pts[k] - t) <= 1e-12:
                out[j] = self.beta_hat.values[k]
            elif k > 0 and abs(grid_pts[k - 1] - t) <= 1e-12:
                out[j] = self.beta_hat.values[k - 1]
            else:
                out[j] = np.interp(t, grid_pts, self.beta_hat.values)
        return out

    def to_json_dict(self) -> dict:
        return {
            "tau": self.tau,
            "lambda": self.lam,
            "h": self.h,
            "alpha_hat": self.alpha_hat,
            "b_hat": self.b_hat,
            "theta": {
                "alpha": self.theta.alpha,
                "d": self.theta.d.tolist(),
                "c": self.theta.c.tolist(),
            },
            "grid": self.grid.points.tolist(),
            "beta_hat": self.beta_hat.values.tolist(),
            "residuals": self.residuals.tolist(),
            "trace": {
                "iterations": self.trace.iterations,
                "final_grad_norm": self.trace.final_grad_norm,
                "safeguard_hits": self.trace.safeguard_hits,
                "converged": self.trace.converged,
                "objective_path": np.asarray(self.trace.objective_path).tolist(),
            },
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def from_json_dict(doc: dict) -> "FitResult":
        grid = Grid(np.asarray(doc["grid"]))
        theta = Theta(
            alpha=float(doc["theta"]["alpha"]),
            d=np.asarray(doc["theta"]["d"]),
            c=np.asarray(doc["theta"]["c"]),
        )
        tr = doc["trace"]
        trace = FitTrace(
            iterations=int(tr["iterations"]),
            objective_path=np.asarray(tr["objective_path"]),
            final_grad_norm=float(tr["final_grad_norm"]),
            safeguard_hits=int(tr["safeguard_hits"]),
            converged=bool(tr["converged"]),
        )
        return FitResult(
            tau=float(doc["tau"]),
            theta=theta,
            lam=float(doc["lambda"]),
            h=float(doc["h"]),
            grid=grid,
            beta_hat=GridFunction(grid, np.asarray(doc["beta_hat"])),
            alpha_hat=float(doc["alpha_hat"]),
            residuals=np.asarray(doc["residuals"]),
            b_hat=float(doc["b_hat"]),
            trace=trace,
        )

    @staticmethod
    def load_json(path) -> "FitResult":
        with open(path) as fh:
            return FitResult.from_json_dict(json.load(fh))


def assemble_beta(theta: Theta, context: FitContext) -> GridFunction:
    """Slope values on the grid from representer coordinates."""
    psi = null_basis_values(context.sample.grid.points)
    values = psi @ theta.d + theta.c @ context.gram.xi_funcs
    return GridFunction(context.sample.grid, values)


def estimate_sparsity(residuals, tau: float) -> float:
    """Residual density at its tau-quantile, via Gaussian KDE.

    Uses the Silverman bandwidth 0.9 min(sd, iqr/1.34) n^(-1/5); the result
    is floored at 1e-6 so downstream interval widths stay finite.
    """
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size < 10:
        raise InvalidInput("sparsity estimation needs at least 10 residuals")
    q = float(np.quantile(r, tau))
    sd = float(np.std(r, ddof=1))
    iqr = float(np.quantile(r, 0.75) - np.quantile(r, 0.25))
    bw = 0.9 * min(sd, iqr / 1.34) * r.size ** (-0.2)
    if bw <= 0:
        return SPARSITY_FLOOR
    z = (q - r) / bw
    value = float(np.mean(np.exp(-0.5 * z * z))) / (bw * np.sqrt(2.0 * np.pi))
    return max(value, SPARSITY_FLOOR)


def fit(
    sample: FunctionalSample,
    tau: float,
    h: float | None = None,
    lam: float | None = None,
    config: GdConfig | None = None,
    tuning: TuningConfig | None = None,
    context: FitContext | None = None,
) -> FitResult:
    """Fit the penalized smoothed quantile model at one level."""
    if not 0.0 < tau < 1.0:
        raise InvalidInput(f"tau must lie in (0, 1), got {tau}")
    context = context or FitContext.build(sample)
    gram = context.gram
    if h is None:
        h = rot_bandwidth(sample, tau, kern=context.kern, gram=gram)
    cv_table = None
    if lam is None:
        lam, cv_table = cross_validate_lambda(
            sample, tau, h, config=tuning, kern=context.kern, gram=gram
        )

    # Optimize with the response centered at the initial intercept (the
    # empirical tau-quantile): the residual-based objective is unchanged,
    # and intercept shifts of Y then reproduce the same iterate sequence up
    # to rounding instead of accumulating along a different trajectory.
    y = sample.responses
    alpha0 = float(np.quantile(y, tau))
    init = Theta(alpha=0.0, d=np.zeros(gram.m), c=np.zeros(gram.n))
    centered, trace = minimize(init, gram, y - alpha0, tau, h, lam, config)
    theta = Theta(alpha=centered.alpha + alpha0, d=centered.d, c=centered.c)

    beta_hat = assemble_beta(theta, context)
    predictions = theta.alpha + np.array(
        [inner_l2(sample.curve(i), beta_hat) for i in range(sample.n)]
    )
    residuals = y - predictions
    b_hat = estimate_sparsity(residuals, tau) if sample.n >= 10 else SPARSITY_FLOOR
    return FitResult(
        tau=tau,
        theta=theta,
        lam=float(lam),
        h=float(h),
        grid=sample.grid,
        beta_hat=beta_hat,
        alpha_hat=theta.alpha,
        residuals=residuals,
        b_hat=b_hat,
        trace=trace,
        cv_table=cv_table,
    )


def predict(fit_result: FitResult, x: GridFunction) -> float:
    """Conditional tau-quantile at a new curve: alpha + <x, beta>."""
    if not fit_result.grid.matches(x.grid):
        raise GridMismatch("prediction curve lives on a different grid")
    return fit_result.alpha_hat + inner_l2(x, fit_result.beta_hat)


@dataclass
class QuantileCurveFamily:
    """Per-tau fits over an increasing tau grid (not yet monotonized)."""

    taus: np.ndarray
    fits: list
    failures: list = field(default_factory=list)
    monotone: bool = False

    def predict_path(self, x: GridFunction) -> np.ndarray:
        return np.array([predict(f, x) for f in self.fits])


def fit_family(
    sample: FunctionalSample,
    taus,
    h: float | None = None,
    lam: float | None = None,
    shared_lambda: bool = False,
    config: GdConfig | None = None,
    tuning: TuningConfig | None = None,
    context: FitContext | None = None,
) -> QuantileCurveFamily:
    """Independent per-tau fits; collects per-tau failures.

    ``shared_lambda`` cross-validates once at the tau closest to 0.5 and
    reuses that penalty across the family (Monte Carlo speed switch).
    """
    taus = np.asarray(taus, dtype=float).ravel()
    if taus.size == 0:
        raise InvalidTauGrid("empty tau grid")
    if np.any(taus <= 0.0) or np.any(taus >= 1.0):
        raise InvalidTauGrid("tau grid must lie strictly inside (0, 1)")
    if np.unique(taus).size != taus.size:
        raise InvalidTauGrid("tau grid contains duplicates")
    if np.any(np.diff(taus) <= 0):
        raise InvalidTauGrid("tau grid must be increasing")
    context = context or FitContext.build(sample)

    lam_shared = lam
    if lam is None and shared_lambda:
        tau_mid = float(taus[np.argmin(np.abs(taus - 0.5))])
        h_mid = h if h is not None else rot_bandwidth(
            sample, tau_mid, kern=context.kern, gram=context.gram
        )
        lam_shared, _ = cross_validate_lambda(
            sample, tau_mid, h_mid, config=tuning, kern=context.kern, gram=context.gram
        )

    fits, failures = [], []
    for tau in taus:
        try:
            fits.append(
                fit(
                    sample,
                    float(tau),
                    h=h,
                    lam=lam_shared,
                    config=config,
                    tuning=tuning,
                    context=context,
                )
            )
        except FlqrError as exc:
            failures.append((float(tau), exc))
            fits.append(None)
    if all(f is None for f in fits):
        raise InvalidInput(f"every quantile level failed: {failures}")
    kept = [f for f in fits if f is not None]
    kept_taus = np.array([f.tau for f in kept])
    return QuantileCurveFamily(taus=kept_taus, fits=kept, failures=failures)
