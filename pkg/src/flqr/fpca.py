"""Principal-component baseline: quantile regression on leading FPC scores.

Curves are centered, the empirical covariance is eigendecomposed under the
trapezoid inner product, and the response is regressed on the leading scores
with the smoothed quantile loss (no roughness penalty).  The slope estimate
is assembled from the score loadings.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import GridMismatch, InvalidInput
from .grids import FunctionalSample, GridFunction, inner_l2
from .optimizer import DesignProblem, GdConfig, minimize_design
from .tuning import rot_bandwidth

FVE_TARGET = 0.99
MAX_COMPONENTS = 20


@dataclass
class FpcaFit:
    """Score-space quantile fit assembled back into function space."""

    tau: float
    h: float
    alpha_hat: float
    beta_hat: GridFunction
    n_components: int
    fve: float
    residuals: np.ndarray


def _fpca_decompose(sample: FunctionalSample):
    w = sample.grid.weights
    mean_curve = sample.curves.mean(axis=0)
    centered = sample.curves - mean_curve
    cov = centered.T @ centered / sample.n
    sw = np.sqrt(w)
    sym = sw[:, None] * cov * sw[None, :]
    evals, evecs = np.linalg.eigh(sym)
    order = np.argsort(evals)[::-1]
    evals = np.maximum(evals[order], 0.0)
    efuncs = evecs[:, order] / sw[:, None]  # L2-orthonormal on the grid
    return mean_curve, centered, evals, efuncs


def fpca_baseline_fit(
    sample: FunctionalSample,
    tau: float,
    n_components: int | None = None,
    h: float | None = None,
    config: GdConfig | None = None,
) -> FpcaFit:
    """Fit the FPC-score smoothed quantile regression."""
    if not 0.0 < tau < 1.0:
        raise InvalidInput(f"tau must lie in (0, 1), got {tau}")
    if n_components is not None and n_components >= sample.n:
        raise InvalidInput("n_components must be smaller than the sample size")
    mean_curve, centered, evals, efuncs = _fpca_decompose(sample)

    total = float(evals.sum())
    rank = int(np.sum(evals > 1e-12 * max(total, 1.0)))
    if rank == 0:
        raise InvalidInput("curves have no variance; no components to regress on")
    if n_components is None:
        fve = np.cumsum(evals) / total
        n_components = int(np.searchsorted(fve, FVE_TARGET) + 1)
        n_components = min(n_components, MAX_COMPONENTS, rank, sample.n - 1)
    elif n_components > rank:
        warnings.warn(
            f"covariance rank {rank} < requested {n_components} components; reducing",
            stacklevel=2,
        )
        n_components = rank

    efuncs = efuncs[:, :n_components]
    scores = (centered * sample.grid.weights) @ efuncs  # (n, k)
    if h is None:
        h = rot_bandwidth(sample, tau)

    design = np.concatenate([np.ones((sample.n, 1)), scores], axis=1)
    w0 = np.zeros(design.shape[1])
    w0[0] = np.quantile(sample.responses, tau)
    problem = DesignProblem(design=design, response=sample.responses, tau=tau, h=h)
    w, _ = minimize_design(problem, w0, config)

    beta_vals = efuncs @ w[1:]
    beta_hat = GridFunction(sample.grid, beta_vals)
    # Scores used centered curves; fold the mean back into the intercept.
    alpha_hat = float(w[0]) - float(
        inner_l2(GridFunction(sample.grid, mean_curve), beta_hat)
    )
    predictions = alpha_hat + np.array(
        [inner_l2(sample.curve(i), beta_hat) for i in range(sample.n)]
    )
    fve_used = float(evals[:n_components].sum() / total)
    return FpcaFit(
        tau=tau,
        h=float(h),
        alpha_hat=alpha_hat,
        beta_hat=beta_hat,
        n_components=n_components,
        fve=fve_used,
        residuals=sample.responses - predictions,
    )


def fpca_predict(fit: FpcaFit, x: GridFunction) -> float:
    if not fit.beta_hat.grid.matches(x.grid):
        raise GridMismatch("prediction curve lives on a different grid")
    return fit.alpha_hat + inner_l2(x, fit.beta_hat)
