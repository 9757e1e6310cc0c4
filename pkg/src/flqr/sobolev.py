"""Second-order Sobolev reproducing kernel and representer Gram matrices.

The coefficient function lives in the Sobolev space on [0, 1] normed by

    sum_{l<m} (int f^(l))^2 + int (f^(m))^2,

whose reproducing kernel decomposes as R = R0 + R1 with R0 spanning the
polynomial null space of the roughness penalty and R1 the kernel of its
orthogonal complement H1.  For this norm the kernels are the classical
scaled-Bernoulli-polynomial pair; with m = 2:

    R1(s, t) = k2(s) k2(t) - k4(|s - t|),      k_r = B_r / r!

The penalty J(f, g) = int f'' g'' coincides with the H1 inner product on H1,
so the n x n matrix Xi with entries J(xi_i, xi_j) doubles as the matrix of
H1 pairings of the representer sections xi_i(t) = int R1(t, s) X_i(s) ds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, GridMismatch
from .grids import FunctionalSample, Grid, GridFunction, _frozen

#: fixed penalty order in this release; the API keeps m symbolic so higher
#: orders can be added without breaking callers.
PENALTY_ORDER = 2


def _k1(t):
    return t - 0.5


def _k2(t):
    return 0.5 * (t * t - t + 1.0 / 6.0)


def _k4(t):
    t2 = t * t
    return (t2 * t2 - 2.0 * t2 * t + t2 - 1.0 / 30.0) / 24.0


def kernel_r1(s, t):
    """Reproducing kernel of H1 evaluated at (s, t); accepts arrays.

    Raises DomainError when either argument leaves [0, 1].
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(s > 1) or np.any(t < 0) or np.any(t > 1):
        raise DomainError("kernel arguments must lie in [0, 1]")
    out = _k2(s) * _k2(t) - _k4(np.abs(s - t))
    return float(out) if out.ndim == 0 else out


def null_basis_values(points: np.ndarray) -> np.ndarray:
    """Values of the (unnormalized) penalty null basis {1, t - 1/2}."""
    return np.column_stack([np.ones_like(points), points - 0.5])


@dataclass(frozen=True)
class SobolevKernel:
    """R1 evaluated on a grid, together with the null-space basis."""

    grid: Grid
    order: int = PENALTY_ORDER

    def __post_init__(self):
        if self.order != PENALTY_ORDER:
            raise DomainError(f"only order m = {PENALTY_ORDER} is implemented")
        pts = self.grid.points
        r1 = _k2(pts)[:, None] * _k2(pts)[None, :] - _k4(np.abs(pts[:, None] - pts[None, :]))
        object.__setattr__(self, "r1", _frozen(r1))
        object.__setattr__(self, "null_basis_matrix", _frozen(null_basis_values(pts)))

    @property
    def m(self) -> int:
        return self.order

    @property
    def null_basis(self):
        return [
            GridFunction(self.grid, self.null_basis_matrix[:, l])
            for l in range(self.order)
        ]

    def r1_rows(self, t) -> np.ndarray:
        """Rows R1(t_i, s_k) for off-grid evaluation points ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = self.grid.points
        return _k2(t)[:, None] * _k2(s)[None, :] - _k4(np.abs(t[:, None] - s[None, :]))


@dataclass(frozen=True)
class RepresenterGram:
    """All Gram matrices of the representer-theorem objective.

    Attributes
    ----------
    xi : (n, n) ndarray
        J(xi_i, xi_j) = double integral of X_i(s) R1(s, t) X_j(t).
    n_mat : (n, m) ndarray
        L2 pairings of each curve with the null basis.
    xi_funcs : (n, p) ndarray
        Row i holds xi_i evaluated on the grid.
    """

    xi: np.ndarray
    n_mat: np.ndarray
    xi_funcs: np.ndarray

    @property
    def s(self) -> np.ndarray:
        # xi_i lies in H1, where the full-space pairing and the penalty
        # pairing coincide, so S = Xi by construction.
        return self.xi

    @property
    def n(self) -> int:
        return self.xi.shape[0]

    @property
    def m(self) -> int:
        return self.n_mat.shape[1]


def xi_functions(sample: FunctionalSample, kern: SobolevKernel) -> np.ndarray:
    """Representer sections xi_i(t) = int R1(t, s) X_i(s) ds on the grid."""
    if not sample.grid.matches(kern.grid):
        raise GridMismatch("sample and kernel grids differ")
    weighted = sample.curves * sample.grid.weights
    return weighted @ kern.r1


def build_gram(sample: FunctionalSample, kern: SobolevKernel) -> RepresenterGram:
    """Assemble Xi, the null-basis score matrix, and the xi sections."""
    if not sample.grid.matches(kern.grid):
        raise GridMismatch("sample and kernel grids differ")
    weighted = sample.curves * sample.grid.weights
    xi_funcs = weighted @ kern.r1
    xi = xi_funcs @ weighted.T
    xi = 0.5 * (xi + xi.T)
    n_mat = weighted @ kern.null_basis_matrix
    return RepresenterGram(xi=_frozen(xi), n_mat=_frozen(n_mat), xi_funcs=_frozen(xi_funcs))
