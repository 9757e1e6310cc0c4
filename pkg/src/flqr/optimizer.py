"""Gradient descent with safeguarded Barzilai-Borwein steps.

The reduced objective over theta = (alpha, d, c) is

    Q_h(theta) = (1/n) sum_i l_h(Y_i - alpha - N_i d - Xi_i c; tau)
                 + (lambda/2) c' Xi c.

Internally the solver works on a generic "design + quadratic penalty"
problem (design matrix D, PSD penalty P),

    (1/n) sum_i l_h(y_i - D_i w; tau) + (lambda/2) w' P w,

with gradient (1/n) D' [Kbar(-r/h) - tau] + lambda P w.  The representer
problem is the special case D = [1 | N | Xi], P = blockdiag(0, 0, Xi); the
same core also fits pilot and principal-component quantile regressions.

Step sizes follow the BB secant rules gamma1 = <d,d>/<d,g>, gamma2 =
<d,g>/<g,g> on the concatenated parameter vector, safeguarded by
min{gamma1, gamma2, 100} when gamma1 > 0 and by 1 otherwise; the first step
uses gamma0 = 1.  The iteration stops once ||grad Q_h||_2 <= tol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .exceptions import (
    DimensionMismatch,
    DivergenceError,
    InvalidInput,
    SafeguardTrigger,
)
from .smoothing import smoothed_loss
from .sobolev import RepresenterGram


@dataclass(frozen=True)
class Theta:
    """Representer coordinates of a fitted quantile model at one tau."""

    alpha: float
    d: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "c", c)
        if not (np.isfinite(self.alpha) and np.all(np.isfinite(d)) and np.all(np.isfinite(c))):
            raise InvalidInput("theta has non-finite entries")

    def concat(self) -> np.ndarray:
        return np.concatenate([[self.alpha], self.d, self.c])

    @staticmethod
    def from_concat(w: np.ndarray, m: int) -> "Theta":
        return Theta(alpha=float(w[0]), d=w[1 : 1 + m], c=w[1 + m :])

    @staticmethod
    def zeros(m: int, n: int) -> "Theta":
        return Theta(alpha=0.0, d=np.zeros(m), c=np.zeros(n))


@dataclass(frozen=True)
class GdConfig:
    tol: float = 1e-6
    max_iter: int = 10_000
    gamma_cap: float = 100.0
    gamma0: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidInput("tol must be positive")
        if self.max_iter < 1:
            raise InvalidInput("max_iter must be at least 1")


@dataclass
class FitTrace:
    """Optimization diagnostics.

    ``safeguard_hits`` counts iterations where the raw BB rate was rejected,
    either falling back to 1 (non-positive or non-finite secant) or clipping
    at the cap.
    """

    iterations: int
    objective_path: np.ndarray
    final_grad_norm: float
    safeguard_hits: int
    converged: bool


@dataclass(frozen=True)
class DesignProblem:
    """Smoothed quantile regression on an explicit design matrix."""

    design: np.ndarray
    response: np.ndarray
    tau: float
    h: float
    lam: float = 0.0
    penalty: np.ndarray | None = None

    def __post_init__(self):
        d = np.asarray(self.design, dtype=float)
        y = np.asarray(self.response, dtype=float).ravel()
        if d.ndim != 2 or d.shape[0] != y.size:
            raise DimensionMismatch("design rows must match response length")
        if self.penalty is not None and self.penalty.shape != (d.shape[1], d.shape[1]):
            raise DimensionMismatch("penalty must be q x q for a q-column design")
        object.__setattr__(self, "design", d)
        object.__setattr__(self, "response", y)

    def objective(self, w: np.ndarray) -> float:
        r = self.response - self.design @ w
        val = float(np.mean(smoothed_loss(r, self.tau, self.h)))
        if self.penalty is not None and self.lam != 0.0:
            val += 0.5 * self.lam * float(w @ (self.penalty @ w))
        return val

    def gradient(self, w: np.ndarray) -> np.ndarray:
        r = self.response - self.design @ w
        u = ndtr(-r / self.h) - self.tau
        g = self.design.T @ u / r.size
        if self.penalty is not None and self.lam != 0.0:
            g = g + self.lam * (self.penalty @ w)
        return g


def _representer_problem(gram: RepresenterGram, y, tau, h, lam) -> DesignProblem:
    y = np.asarray(y, dtype=float).ravel()
    if y.size != gram.n:
        raise DimensionMismatch(f"{y.size} responses for an n = {gram.n} Gram")
    n, m = gram.n, gram.m
    design = np.concatenate(
        [np.ones((n, 1)), gram.n_mat, gram.s], axis=1
    )
    penalty = np.zeros((1 + m + n, 1 + m + n))
    penalty[1 + m :, 1 + m :] = gram.xi
    return DesignProblem(design=design, response=y, tau=tau, h=h, lam=lam, penalty=penalty)


def _check_theta_dims(theta: Theta, gram: RepresenterGram):
    if theta.d.size != gram.m or theta.c.size != gram.n:
        raise DimensionMismatch(
            f"theta dims ({theta.d.size}, {theta.c.size}) do not match "
            f"gram dims ({gram.m}, {gram.n})"
        )


def objective(theta: Theta, gram: RepresenterGram, y, tau, h, lam) -> float:
    """Reduced objective Q_h(alpha, d, c; tau)."""
    _check_theta_dims(theta, gram)
    return _representer_problem(gram, y, tau, h, lam).objective(theta.concat())


def gradient(theta: Theta, gram: RepresenterGram, y, tau, h, lam):
    """Gradient blocks (g_alpha, g_d, g_c) of the reduced objective."""
    _check_theta_dims(theta, gram)
    g = _representer_problem(gram, y, tau, h, lam).gradient(theta.concat())
    m = gram.m
    return float(g[0]), g[1 : 1 + m], g[1 + m :]


def bb_step(delta: np.ndarray, g: np.ndarray):
    """Both BB rates (gamma1, gamma2) from secant pairs.

    Raises SafeguardTrigger when <delta, g> vanishes; callers fall back to a
    unit step.
    """
    delta = np.asarray(delta, dtype=float).ravel()
    g = np.asarray(g, dtype=float).ravel()
    if delta.size != g.size:
        raise DimensionMismatch("secant vectors differ in length")
    dd = float(delta @ delta)
    gg = float(g @ g)
    if dd == 0.0 and gg == 0.0:
        raise InvalidInput("both secant vectors are zero")
    dg = float(delta @ g)
    if dg == 0.0:
        raise SafeguardTrigger("secant inner product vanished")
    return dd / dg, dg / gg


def _equilibrated(problem: DesignProblem):
    """Column-equilibrated copy of the problem plus the coordinate scales.

    The Sobolev-kernel Gram columns are several orders of magnitude smaller
    than the intercept column, which stalls any shared-step-size descent.
    Rescaling each column to unit root-mean-square is a pure change of
    variables: the objective value is unchanged and gradients map back by
    elementwise multiplication with the scales.
    """
    scale = np.sqrt(np.mean(problem.design**2, axis=0))
    scale[~(scale > 0)] = 1.0
    design = problem.design / scale
    penalty = None
    if problem.penalty is not None:
        penalty = problem.penalty / np.outer(scale, scale)
    scaled = DesignProblem(
        design=design,
        response=problem.response,
        tau=problem.tau,
        h=problem.h,
        lam=problem.lam,
        penalty=penalty,
    )
    return scaled, scale


def minimize_design(problem: DesignProblem, w0: np.ndarray, config: GdConfig | None = None):
    """Run safeguarded GD-BB on a design problem; returns (w, FitTrace).

    Iterations run in column-equilibrated coordinates; the returned solution,
    objective path, and the gradient-norm stopping rule all refer to the
    original parametrization.
    """
    config = config or GdConfig()
    scaled, scale = _equilibrated(problem)
    w = np.asarray(w0, dtype=float) * scale  # to equilibrated coordinates
    g = scaled.gradient(w)
    grad_norm = float(np.linalg.norm(g * scale))  # original-coordinate norm
    obj = scaled.objective(w)
    if not np.isfinite(obj):
        raise DivergenceError("objective non-finite at the initial point")
    path = [obj]
    best_w, best_obj = w.copy(), obj
    if grad_norm <= config.tol:
        return w / scale, FitTrace(0, np.asarray(path), grad_norm, 0, True)

    safeguard_hits = 0
    prev_w = prev_g = None
    for it in range(1, config.max_iter + 1):
        if prev_w is None:
            gamma = config.gamma0
        else:
            delta = w - prev_w
            gdiff = g - prev_g
            dg = float(delta @ gdiff)
            if dg > 0.0:
                gamma1 = float(delta @ delta) / dg
                gamma2 = dg / float(gdiff @ gdiff)
                gamma = min(gamma1, gamma2, config.gamma_cap)
                if not np.isfinite(gamma) or gamma <= 0.0:
                    gamma = 1.0
                    safeguard_hits += 1
                elif gamma == config.gamma_cap and min(gamma1, gamma2) > config.gamma_cap:
                    safeguard_hits += 1
            else:
                gamma = 1.0
                safeguard_hits += 1
        prev_w, prev_g = w, g
        w = w - gamma * g
        obj = scaled.objective(w)
        if not np.isfinite(obj):
            raise DivergenceError(
                f"objective became non-finite at iteration {it}",
                trace=FitTrace(it, np.asarray(path), float("nan"), safeguard_hits, False),
            )
        path.append(obj)
        if obj < best_obj:
            best_w, best_obj = w.copy(), obj
        g = scaled.gradient(w)
        grad_norm = float(np.linalg.norm(g * scale))
        if grad_norm <= config.tol:
            return w / scale, FitTrace(it, np.asarray(path), grad_norm, safeguard_hits, True)

    # BB is non-monotone, so on exhaustion report the best iterate seen.
    best = best_w / scale
    grad_norm = float(np.linalg.norm(problem.gradient(best)))
    return best, FitTrace(config.max_iter, np.asarray(path), grad_norm, safeguard_hits, False)


def minimize(init: Theta, gram: RepresenterGram, y, tau, h, lam, config: GdConfig | None = None):
    """Minimize the reduced objective from ``init``; returns (Theta, FitTrace)."""
    _check_theta_dims(init, gram)
    problem = _representer_problem(gram, y, tau, h, lam)
    w, trace = minimize_design(problem, init.concat(), config)
    return Theta.from_concat(w, gram.m), trace
