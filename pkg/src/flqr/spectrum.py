"""Simultaneous diagonalization of the weighted covariance and the penalty.

The inference formulas all run through eigenpairs (rho_nu, phi_nu) with

    V(phi_mu, phi_nu) = delta_mn,     J(phi_mu, phi_nu) = rho_nu delta_mn,

where V is the quadratic form of the weighted covariance C(s, t) =
B * E[X(s) X(t)] and J integrates products of second derivatives.  The
continuous problem is discretized in a cubic B-spline basis: J is computed
exactly (Gauss-Legendre per knot span, the integrand is piecewise
polynomial), V by trapezoid quadrature of the empirical covariance, and the
generalized symmetric eigenproblem J w = rho V w is solved directly with
V-orthonormalization.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.interpolate import BSpline

from .exceptions import InvalidInput, SpectrumFailure
from .grids import FunctionalSample, Grid, GridFunction, _frozen

DEFAULT_N_EIG = 30
DEFAULT_BASIS_CAP = 50
PENALTY_ORDER = 2
_SIGN_EPS = 1e-6
#: relative eigenvalue floor below which covariance directions are dropped
#: from the generalized eigensolve.
V_EIG_FLOOR = 1e-10


def weighted_covariance(sample: FunctionalSample, b_hat: float) -> np.ndarray:
    """Plug-in weighted covariance (B_hat / n) sum_i X_i(s) X_i(t) on the grid."""
    if not b_hat > 0:
        raise InvalidInput("b_hat must be positive")
    x = sample.curves
    c = (b_hat / x.shape[0]) * (x.T @ x)
    return 0.5 * (c + c.T)


def bspline_knots(basis_dim: int) -> np.ndarray:
    """Open uniform cubic knot vector for ``basis_dim`` basis functions."""
    if basis_dim < PENALTY_ORDER + 2:
        raise InvalidInput(f"basis dimension must be at least {PENALTY_ORDER + 2}")
    interior = np.linspace(0.0, 1.0, basis_dim - 2)[1:-1]
    return np.concatenate([np.zeros(4), interior, np.ones(4)])


def basis_matrix(knots: np.ndarray, points: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Evaluate all cubic B-splines (or a derivative) at ``points``."""
    k = knots.size - 4
    spl = BSpline(knots, np.eye(k), 3, extrapolate=False)
    if deriv:
        spl = spl.derivative(deriv)
    pts = np.clip(points, knots[0], knots[-1])
    out = spl(pts)
    return np.nan_to_num(out, nan=0.0)


def penalty_matrix(basis_dim: int, grid: Grid | None = None) -> np.ndarray:
    """Exact Gram matrix of second derivatives of the B-spline basis.

    Second derivatives of cubic splines are piecewise linear, so per-span
    3-point Gauss-Legendre integrates their products exactly.
    """
    knots = bspline_knots(basis_dim)
    spans = np.unique(knots)
    nodes, weights = np.polynomial.legendre.leggauss(3)
    pts, wts = [], []
    for a, b in zip(spans[:-1], spans[1:]):
        half = 0.5 * (b - a)
        pts.append(half * nodes + 0.5 * (a + b))
        wts.append(half * weights)
    pts = np.concatenate(pts)
    wts = np.concatenate(wts)
    d2 = basis_matrix(knots, pts, deriv=PENALTY_ORDER)
    j = d2.T @ (wts[:, None] * d2)
    return 0.5 * (j + j.T)


@dataclass
class EigenSystem:
    """Simultaneous-diagonalization pairs on the sample grid.

    rho is nonnegative and nondecreasing; phi_matrix holds phi_nu on the
    grid (column nu) and coef_matrix the B-spline coefficients for exact
    off-grid evaluation.  scores holds int X_i phi_nu by trapezoid.
    """

    grid: Grid
    rho: np.ndarray
    phi_matrix: np.ndarray
    coef_matrix: np.ndarray
    knots: np.ndarray
    scores: np.ndarray
    b_hat: float
    n_eig: int
    v_residual: float
    j_residual: float

    @property
    def phis(self):
        return [GridFunction(self.grid, self.phi_matrix[:, k]) for k in range(self.n_eig)]

    def phi_at(self, points) -> np.ndarray:
        """phi_nu evaluated anywhere in [0, 1]; shape (len(points), n_eig)."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        return basis_matrix(self.knots, points) @ self.coef_matrix

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rho"] + [repr(t) for t in self.grid.points])
            for k in range(self.n_eig):
                writer.writerow(
                    [repr(float(self.rho[k]))]
                    + [repr(float(v)) for v in self.phi_matrix[:, k]]
                )


def solve_eigensystem(
    sample: FunctionalSample,
    b_hat: float,
    n_eig: int | None = None,
    basis_dim: int | None = None,
) -> EigenSystem:
    """Solve the discretized generalized eigenproblem J w = rho V w."""
    if basis_dim is None:
        basis_dim = min(sample.n, DEFAULT_BASIS_CAP)
    basis_dim = max(basis_dim, PENALTY_ORDER + 2)
    if n_eig is None:
        n_eig = min(DEFAULT_N_EIG, basis_dim - 2)
    if n_eig > basis_dim - 2:
        raise InvalidInput(
            f"n_eig = {n_eig} too large for basis dimension {basis_dim}"
        )

    knots = bspline_knots(basis_dim)
    b_grid = basis_matrix(knots, sample.grid.points)
    c_hat = weighted_covariance(sample, b_hat)
    bw = b_grid * sample.grid.weights[:, None]
    v = bw.T @ c_hat @ bw
    v = 0.5 * (v + v.T)
    j = penalty_matrix(basis_dim)

    trace_v = float(np.trace(v))
    if trace_v <= 0:
        raise SpectrumFailure("weighted covariance has nonpositive trace")
    v_eigs = np.linalg.eigvalsh(v)
    if v_eigs[0] < 1e-12 * trace_v:
        v = v + (1e-10 * trace_v / basis_dim) * np.eye(basis_dim)

    # The covariance form is typically near-singular in the spline basis
    # (curves span fewer directions than the basis), which makes a direct
    # whitening solve lose the penalty null space entirely.  Solve instead
    # on the V-eigendirections above a relative floor: the retained pairs
    # satisfy both quadratic forms to machine precision and the discarded
    # directions carry no covariance mass.
    v_eigs, v_vecs = np.linalg.eigh(v)
    keep = v_eigs >= V_EIG_FLOOR * v_eigs[-1]
    if not np.any(keep):
        raise SpectrumFailure("weighted covariance is numerically zero")
    retained = int(keep.sum())
    if n_eig > retained:
        cond = v_eigs[-1] / max(v_eigs[0], np.finfo(float).tiny)
        raise SpectrumFailure(
            f"only {retained} covariance directions are numerically stable "
            f"(condition ~ {cond:.2e}); reduce n_eig below {retained}"
        )
    q = v_vecs[:, keep]
    inv_sqrt = 1.0 / np.sqrt(v_eigs[keep])
    m = (q * inv_sqrt).T @ j @ (q * inv_sqrt)
    m = 0.5 * (m + m.T)
    try:
        rho, u = scipy.linalg.eigh(m)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise SpectrumFailure(f"reduced eigensolve failed: {exc}") from exc
    w = (q * inv_sqrt) @ u

    rho = rho[:n_eig]
    w = w[:, :n_eig]
    floor = -1e-6 * (1.0 + float(np.abs(rho).max()))
    if np.any(rho < floor):
        raise SpectrumFailure(f"negative penalty eigenvalue {rho.min():.3e}")
    rho = np.maximum(rho, 0.0)

    phi = b_grid @ w
    # Eigenfunctions are defined up to sign; anchor each to be positive at
    # the first grid point where it is visibly nonzero.
    for k in range(n_eig):
        nz = np.nonzero(np.abs(phi[:, k]) > _SIGN_EPS)[0]
        if nz.size and phi[nz[0], k] < 0:
            phi[:, k] = -phi[:, k]
            w[:, k] = -w[:, k]

    # Diagonalization residuals, Gram-checked on the grid values of phi.
    wphi = phi * sample.grid.weights[:, None]
    v_gram = wphi.T @ c_hat @ wphi
    v_res = float(np.abs(v_gram - np.eye(n_eig)).max())
    jw = w.T @ j @ w
    j_res = float(np.abs(jw - np.diag(np.diag(jw))).max())
    scores = (sample.curves * sample.grid.weights) @ phi
    return EigenSystem(
        grid=sample.grid,
        rho=_frozen(rho),
        phi_matrix=_frozen(phi),
        coef_matrix=_frozen(w),
        knots=_frozen(knots),
        scores=_frozen(scores),
        b_hat=float(b_hat),
        n_eig=int(n_eig),
        v_residual=v_res,
        j_residual=j_res,
    )


def w_lambda_apply(es: EigenSystem, beta_coeffs, lam: float) -> np.ndarray:
    """Shrinkage action: coefficient nu is multiplied by lam*rho/(1 + lam*rho)."""
    coeffs = np.asarray(beta_coeffs, dtype=float).ravel()
    if coeffs.size != es.n_eig:
        raise InvalidInput(f"expected {es.n_eig} coefficients, got {coeffs.size}")
    mult = lam * es.rho / (1.0 + lam * es.rho)
    return coeffs * mult
